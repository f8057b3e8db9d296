"""Continuous-time Ornstein-Uhlenbeck (Vasicek) view of the monthly AR(1).

Time is measured in months; rates are in percent. Calibration matches the
AR(1) conditional mean and long-run standard deviation exactly at integer
months, so ``ou_forecast`` and ``forecast_ar1`` agree there.

Random numbers come from ``numpy.random.Generator(PCG64(seed))`` and are
drawn with ``standard_normal``; a given (seed, parameters, grid) yields the
same path bit-for-bit. Multi-path runs use seeds ``seed + i``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from callrate.autoregress import Ar1Fit
from callrate.errors import EstimationError

__all__ = [
    "OuParams",
    "SimPath",
    "calibrate_from_ar1",
    "ou_forecast",
    "simulate_ou",
    "exact_ou_path",
    "normal_draws",
]


@dataclass(frozen=True)
class OuParams:
    """``dX = -theta_bar (X - mu_bar) dt + sigma_bar dW``, t in months."""

    mu_bar: float
    theta_bar: float
    sigma_bar: float

    def __post_init__(self):
        if not self.theta_bar > 0:
            raise ValueError(f"theta_bar must be positive, got {self.theta_bar}")
        if not self.sigma_bar >= 0:
            raise ValueError(f"sigma_bar must be non-negative, got {self.sigma_bar}")

    @property
    def stationary_std(self) -> float:
        return self.sigma_bar / math.sqrt(2.0 * self.theta_bar)

    def per_year(self) -> dict[str, float]:
        """Display conversion: theta per year, sigma per sqrt(year)."""
        return {
            "mu_bar": self.mu_bar,
            "theta_bar": 12.0 * self.theta_bar,
            "sigma_bar": self.sigma_bar * math.sqrt(12.0),
            "stationary_std": self.stationary_std,
        }

    def to_dict(self) -> dict[str, float]:
        return {
            "mu_bar": self.mu_bar,
            "theta_bar": self.theta_bar,
            "sigma_bar": self.sigma_bar,
            "stationary_std": self.stationary_std,
        }


@dataclass(frozen=True)
class SimPath:
    times: np.ndarray
    values: np.ndarray
    seed: int


def calibrate_from_ar1(fit: Ar1Fit) -> OuParams:
    """Moment-match an OU process to a monthly AR(1).

    ``theta_bar = -log(rho)`` and ``sigma_bar = s sqrt(-2 log rho)``, which
    makes the OU stationary std equal the AR(1) long-run std ``s``.
    """
    rho = fit.rho
    if not 0 < rho < 1:
        raise EstimationError(f"rho={rho} has no OU counterpart (needs 0 < rho < 1)")
    theta = -math.log(rho)
    return OuParams(mu_bar=fit.mu, theta_bar=theta, sigma_bar=fit.s * math.sqrt(2.0 * theta))


def ou_forecast(params: OuParams, y0: float, t: float) -> tuple[float, float]:
    """Conditional mean and RMSE ``t`` months ahead."""
    if t < 0:
        raise ValueError("t must be non-negative")
    decay = math.exp(-params.theta_bar * t)
    point = params.mu_bar + decay * (y0 - params.mu_bar)
    rmse = params.stationary_std * math.sqrt(-math.expm1(-2.0 * params.theta_bar * t))
    return point, rmse


def normal_draws(seed: int, n: int) -> np.ndarray:
    return np.random.Generator(np.random.PCG64(seed)).standard_normal(n)


def exact_ou_path(
    x0: float,
    mean: float,
    theta: float,
    diffusion: float,
    step: float,
    z: np.ndarray,
    scheme: str = "exact",
) -> np.ndarray:
    """Propagate an OU state through the shocks ``z``; returns ``len(z) + 1`` values.

    ``scheme="euler"`` uses the Euler-Maruyama step instead, which is biased
    whenever ``theta * step`` is not small.
    """
    if scheme == "exact":
        decay = math.exp(-theta * step)
        scale = diffusion * math.sqrt(-math.expm1(-2.0 * theta * step) / (2.0 * theta))
    elif scheme == "euler":
        decay = 1.0 - theta * step
        scale = diffusion * math.sqrt(step)
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    out = np.empty(z.size + 1)
    out[0] = x0
    # deviation recursion d[k+1] = decay * d[k] + scale * z[k]
    dev, _ = lfilter([1.0], [1.0, -decay], scale * z, zi=[decay * (x0 - mean)])
    out[1:] = mean + dev
    return out


def simulate_ou(
    params: OuParams,
    y0: float,
    step: float,
    n_steps: int,
    seed: int,
    scheme: str = "exact",
) -> SimPath:
    if not step > 0:
        raise ValueError("step must be positive")
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    z = normal_draws(seed, n_steps)
    values = exact_ou_path(y0, params.mu_bar, params.theta_bar, params.sigma_bar, step, z, scheme)
    return SimPath(np.arange(n_steps + 1) * step, values, seed)
