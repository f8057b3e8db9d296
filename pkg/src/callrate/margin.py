"""Margin-loan pricing against a GBM market index and the implied SDEs.

Every rate handled here is an annual rate on the unit-interval scale
(0.05, not 5). Inputs above 1 in magnitude are rejected as likely percents.
:class:`~callrate.ou.OuParams` stay in percent; the ``derive_*`` functions
divide by 100 at the boundary.

The client is a continuous-time Kelly gambler betting ``b = (mu_S - r_L) / sigma_S^2``
of wealth on the index, so loan demand per equity dollar is ``q = b - 1``.
A monopolist broker with marginal cost equal to the call rate prices at the
midpoint of marginal cost and the choke price ``mu_S - sigma_S^2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from callrate.errors import UnitsError
from callrate.ou import OuParams, SimPath, exact_ou_path, normal_draws

__all__ = [
    "MarketIndexParams",
    "MarginRateSde",
    "LeverageSde",
    "STYLIZED_MARKET",
    "monopoly_margin_rate",
    "nash_margin_rate",
    "kelly_bet",
    "derive_margin_sde",
    "derive_leverage_sde",
    "simulate_leverage",
    "cosimulate",
]


def _unit(name: str, value: float) -> float:
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite")
    if abs(value) > 1.0:
        hint = f" (did you mean {value / 100:g}?)" if abs(value) <= 100 else ""
        raise UnitsError(f"{name}={value:g} is not on the unit-interval scale{hint}")
    return value


@dataclass(frozen=True)
class MarketIndexParams:
    """GBM index: log growth ``nu_s`` per year, volatility ``sigma_s`` per sqrt(year)."""

    nu_s: float
    sigma_s: float

    def __post_init__(self):
        _unit("nu_s", self.nu_s)
        _unit("sigma_s", self.sigma_s)
        if not self.sigma_s > 0:
            raise ValueError("sigma_s must be positive")

    @property
    def mu_s(self) -> float:
        return self.nu_s + self.sigma_s**2 / 2

    @property
    def pricing_constant(self) -> float:
        """``C = nu_s / 2 - sigma_s^2 / 4``: the monopoly rate is ``call / 2 + C``."""
        return self.nu_s / 2 - self.sigma_s**2 / 4

    @property
    def choke_price(self) -> float:
        return self.mu_s - self.sigma_s**2


STYLIZED_MARKET = MarketIndexParams(nu_s=0.09, sigma_s=0.15)


def monopoly_margin_rate(call_rate: float, market: MarketIndexParams) -> float:
    _unit("call_rate", call_rate)
    return call_rate / 2 + market.pricing_constant


def nash_margin_rate(call_rate: float, market: MarketIndexParams) -> float:
    """Nash-bargained rate with the no-loan threat point."""
    _unit("call_rate", call_rate)
    return 0.75 * call_rate + 0.25 * (market.nu_s - market.sigma_s**2 / 2)


def kelly_bet(margin_rate: float, market: MarketIndexParams) -> tuple[float, float]:
    """Return ``(b, q)``: Kelly leverage and loans per equity dollar."""
    _unit("margin_rate", margin_rate)
    b = (market.mu_s - margin_rate) / market.sigma_s**2
    return b, b - 1.0


@dataclass(frozen=True)
class MarginRateSde:
    theta: float
    long_run_mean: float
    diffusion: float

    @property
    def stationary_std(self) -> float:
        return abs(self.diffusion) / math.sqrt(2 * self.theta)


@dataclass(frozen=True)
class LeverageSde:
    """``db = -theta (b - long_run_mean) dt + diffusion dW`` with ``W`` the
    call-rate Brownian motion; ``diffusion`` is negative."""

    theta: float
    long_run_mean: float
    diffusion: float

    @property
    def stationary_std(self) -> float:
        return abs(self.diffusion) / math.sqrt(2 * self.theta)

    @property
    def loan_long_run_mean(self) -> float:
        """Long-run mean of ``q = b - 1`` (``dq = db``)."""
        return self.long_run_mean - 1.0


def derive_margin_sde(ou: OuParams, market: MarketIndexParams) -> MarginRateSde:
    mu_bar = _unit("ou.mu_bar / 100", ou.mu_bar / 100)
    return MarginRateSde(
        theta=ou.theta_bar,
        long_run_mean=mu_bar / 2 + market.pricing_constant,
        diffusion=ou.sigma_bar / 100 / 2,
    )


def derive_leverage_sde(ou: OuParams, market: MarketIndexParams) -> LeverageSde:
    margin = derive_margin_sde(ou, market)
    var = market.sigma_s**2
    return LeverageSde(
        theta=ou.theta_bar,
        long_run_mean=(market.mu_s - margin.long_run_mean) / var,
        diffusion=-(ou.sigma_bar / 100) / (2 * var),
    )


def simulate_leverage(
    sde: LeverageSde,
    b0: float,
    step: float,
    n_steps: int,
    seed: int,
    clamp_at_zero: bool = False,
) -> SimPath:
    """Exact-transition path of the leverage ratio (months).

    Uses the same draws as :func:`callrate.ou.simulate_ou` for the same seed,
    so a call-rate path and a leverage path with one seed are co-simulated
    under one Brownian motion. ``clamp_at_zero`` is display-only.
    """
    if not step > 0:
        raise ValueError("step must be positive")
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    z = normal_draws(seed, n_steps)
    values = exact_ou_path(b0, sde.long_run_mean, sde.theta, sde.diffusion, step, z)
    if clamp_at_zero:
        values = np.maximum(values, 0.0)
    return SimPath(np.arange(n_steps + 1) * step, values, seed)


def cosimulate(
    ou: OuParams,
    market: MarketIndexParams,
    y0: float,
    step: float,
    n_steps: int,
    seed: int,
) -> dict[str, np.ndarray]:
    """Call rate (percent), monopoly margin rate and Kelly leverage along one
    shared noise stream. Single-threaded per path."""
    z = normal_draws(seed, n_steps)
    call = exact_ou_path(y0, ou.mu_bar, ou.theta_bar, ou.sigma_bar, step, z)
    sde = derive_leverage_sde(ou, market)
    b0, _ = kelly_bet(monopoly_margin_rate(y0 / 100, market), market)
    lev = exact_ou_path(b0, sde.long_run_mean, sde.theta, sde.diffusion, step, z)
    margin = call / 200 + market.pricing_constant
    return {
        "t": np.arange(n_steps + 1) * step,
        "call_rate": call,
        "margin_rate": margin,
        "leverage": lev,
    }
