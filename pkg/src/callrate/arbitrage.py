"""No-arbitrage pricing of call loans made to brokers against client collateral.

The bank lends ``d`` to a broker who lends ``D > d`` to a client holding one
unit of an asset worth ``S0``. Nobody monitors or hedges until maturity
``T``, so at ``T`` the bank receives ``min(S_T, K)`` with ``K = d exp(R T)``
(``R`` the call rate). Funded at the risk-free rate ``r``, the bank's profit
is a covered-call payoff::

    pi_T = S_T - d exp(r T) - max(S_T - K, 0)

Zero risk-neutral expected profit pins the loan-to-value ``x = d / S0`` as a
function of the premium ``rho = R - r``, the term and the volatility only::

    x = N(-d1) / (1 - N(d2) exp(rho T)),
    -d1 = (log x + (rho - sigma^2 / 2) T) / (sigma sqrt(T)),  d2 = d1 - sigma sqrt(T)

The solvers below find ``x`` (or ``T``) as roots of
``g = x (1 - N(d2) exp(rho T)) - N(-d1)``, which has no poles.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import ndtr

from callrate.errors import NonexistenceError

__all__ = [
    "CreditEvent",
    "CallLoanTerms",
    "ImpliedSolution",
    "REG_T_LIMIT",
    "norm_cdf",
    "bs_call",
    "bank_payoff",
    "bank_expected_profit",
    "implied_ltv",
    "implied_term",
    "ltv_residual",
    "hedge_delta",
    "mc_zero_profit_check",
]

REG_T_LIMIT = 0.5
REG_T_NOTE = (
    "loan-to-value above 0.5: call money alone would exceed the Regulation-T cap "
    "on retail margin debt (d/S0 <= D/S0 <= 0.5)"
)
LTV_EPS = 1e-8
TERM_BRACKET = (1e-6, 50.0)
SCAN_POINTS = 2000


def norm_cdf(x):
    """Standard normal CDF via the complementary error function.

    Accurate in both tails: ``norm_cdf(8)`` is ``1 - 6.2e-16``, not 1.
    """
    return ndtr(x)


def _d1(S, K, r, sigma, tau):
    return (np.log(S / K) + (r + 0.5 * sigma**2) * tau) / (sigma * np.sqrt(tau))


def bs_call(S, t, K, r, sigma, T):
    """Black-Scholes European call value at time ``t`` for expiry ``T``."""
    S, K, sigma = np.asarray(S, float), np.asarray(K, float), np.asarray(sigma, float)
    tau = np.asarray(T, float) - np.asarray(t, float)
    if np.any(S <= 0) or np.any(K <= 0) or np.any(sigma <= 0) or np.any(tau <= 0):
        raise ValueError("bs_call needs S > 0, K > 0, sigma > 0 and T > t")
    d1 = _d1(S, K, r, sigma, tau)
    d2 = d1 - sigma * np.sqrt(tau)
    out = S * ndtr(d1) - K * np.exp(-r * tau) * ndtr(d2)
    return out[()] if out.ndim == 0 else out


class CreditEvent(enum.Enum):
    NO_DEFAULT = "no_default"
    CLIENT_DEFAULTS_ONLY = "client_defaults_only"
    CASCADED_DEFAULT = "cascaded_default"


@dataclass(frozen=True)
class CallLoanTerms:
    """Inputs to call-loan pricing.

    Give exactly one of ``call_rate`` and ``risk_premium``; the other is
    filled in as ``call_rate = r + risk_premium``. All rates are continuously
    compounded, on the unit-interval scale, per year. The currency fields
    (``s0``, ``call_loan`` = d, ``margin_loan`` = D) and ``margin_rate`` are
    only needed for payoff work; ``ltv`` defaults to ``call_loan / s0``.
    """

    r: float
    term: float
    sigma: float
    ltv: float | None = None
    call_rate: float | None = None
    risk_premium: float | None = None
    s0: float | None = None
    call_loan: float | None = None
    margin_loan: float | None = None
    margin_rate: float | None = None

    def __post_init__(self):
        if (self.call_rate is None) == (self.risk_premium is None):
            raise ValueError("give exactly one of call_rate and risk_premium")
        if self.call_rate is None:
            object.__setattr__(self, "call_rate", self.r + self.risk_premium)
        else:
            object.__setattr__(self, "risk_premium", self.call_rate - self.r)
        if self.ltv is None and self.call_loan is not None and self.s0 is not None:
            object.__setattr__(self, "ltv", self.call_loan / self.s0)
        if self.ltv is not None and not 0 < self.ltv < 1:
            raise ValueError(f"ltv must lie in (0, 1), got {self.ltv}")
        if not self.term > 0:
            raise ValueError("term must be positive")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if self.margin_loan is not None:
            if self.call_loan is None or self.s0 is None:
                raise ValueError("margin_loan requires call_loan and s0")
            if not self.call_loan < self.margin_loan < self.s0:
                raise ValueError("need call_loan < margin_loan < s0")
        if self.margin_rate is not None and not self.call_rate < self.margin_rate:
            raise ValueError("need call_rate < margin_rate")

    @property
    def spot(self) -> float:
        return 1.0 if self.s0 is None else self.s0

    @property
    def loan_amount(self) -> float:
        """Call-loan principal ``d`` (``ltv * S0`` when not given in currency)."""
        if self.call_loan is not None:
            return self.call_loan
        if self.ltv is None:
            raise ValueError("terms carry neither call_loan nor ltv")
        return self.ltv * self.spot

    @property
    def strike(self) -> float:
        """``K = d exp(R T)``: what the bank is owed at maturity."""
        return self.loan_amount * math.exp(self.call_rate * self.term)


def bank_payoff(terms: CallLoanTerms, s_t: float) -> tuple[float, CreditEvent]:
    """Bank profit at maturity and the credit event for terminal price ``s_t``.

    Evaluates both the ``min`` form and the covered-call form and insists
    they agree.
    """
    if terms.call_loan is None or terms.margin_loan is None or terms.margin_rate is None:
        raise ValueError("bank_payoff needs call_loan, margin_loan and margin_rate")
    if s_t < 0:
        raise ValueError("terminal price must be non-negative")
    d, T = terms.call_loan, terms.term
    K = terms.strike
    funding = d * math.exp(terms.r * T)
    pi_min = min(s_t, K) - funding
    pi_cc = s_t - funding - max(s_t - K, 0.0)
    if abs(pi_min - pi_cc) > 1e-9 * max(1.0, abs(s_t), K):
        raise ArithmeticError("payoff decompositions disagree")
    owed_by_client = terms.margin_loan * math.exp(terms.margin_rate * T)
    if s_t >= owed_by_client:
        event = CreditEvent.NO_DEFAULT
    elif s_t >= K:
        event = CreditEvent.CLIENT_DEFAULTS_ONLY
    else:
        event = CreditEvent.CASCADED_DEFAULT
    return pi_min, event


def bank_expected_profit(terms: CallLoanTerms) -> float:
    """Risk-neutral present value of ``pi_T``: ``S0 - d - BSCall(S0, K)``."""
    S0 = terms.spot
    return S0 - terms.loan_amount - float(bs_call(S0, 0.0, terms.strike, terms.r, terms.sigma, terms.term))


def _ltv_terms(x, rho, T, sigma):
    sq = sigma * np.sqrt(T)
    minus_d1 = (np.log(x) + (rho - 0.5 * sigma**2) * T) / sq
    d2 = -minus_d1 - sq
    return ndtr(minus_d1), 1.0 - ndtr(d2) * np.exp(rho * T)


def _g(x, rho, T, sigma):
    n_md1, denom = _ltv_terms(x, rho, T, sigma)
    return x * denom - n_md1


def ltv_residual(x: float, rho: float, T: float, sigma: float) -> float:
    """``x - N(-d1) / (1 - N(d2) exp(rho T))``: zero at a consistent LTV."""
    n_md1, denom = _ltv_terms(x, rho, T, sigma)
    return float(x - n_md1 / denom)


def _delta_at(x, rho, T, sigma) -> float:
    n_md1, _ = _ltv_terms(x, rho, T, sigma)
    return float(n_md1)


def _bisect(f: Callable[[float], float], lo: float, hi: float, flo: float, xtol: float, ftol: float) -> float:
    """Bisection on a sign-changing bracket, run until both tolerances hold
    or the bracket collapses to adjacent floats."""
    while True:
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0.0 or (hi - lo < xtol and abs(fm) < ftol) or mid in (lo, hi):
            return mid
        if (fm < 0) == (flo < 0):
            lo, flo = mid, fm
        else:
            hi = mid


def _scan_roots(f_vec, f, lo: float, hi: float, n: int, xtol: float, ftol: float) -> list[float]:
    grid = np.linspace(lo, hi, n + 1)
    vals = f_vec(grid)
    roots = []
    for i in range(n):
        a, b = vals[i], vals[i + 1]
        if a == 0.0:
            roots.append(float(grid[i]))
        elif np.sign(a) != np.sign(b) and b != 0.0:
            roots.append(_bisect(f, float(grid[i]), float(grid[i + 1]), float(a), xtol, ftol))
    if vals[-1] == 0.0:
        roots.append(float(grid[-1]))
    return roots


@dataclass(frozen=True)
class ImpliedSolution:
    value: float
    delta: float
    residual: float
    ltv: float
    roots: tuple[float, ...] = field(default=())

    @property
    def reg_t_violation(self) -> bool:
        return self.ltv > REG_T_LIMIT

    def to_dict(self) -> dict:
        out = {
            "value": self.value,
            "delta": self.delta,
            "residual": self.residual,
            "reg_t_violation": self.reg_t_violation,
        }
        if self.reg_t_violation:
            out["note"] = REG_T_NOTE
        if len(self.roots) > 1:
            out["all_roots"] = list(self.roots)
        return out


def _pick(roots: list[float], what: str) -> tuple[float, tuple[float, ...]]:
    if not roots:
        raise NonexistenceError(f"no-arbitrage-consistent {what} does not exist for these inputs")
    if len(roots) > 1:
        warnings.warn(f"{len(roots)} roots found for {what}: {roots}; returning the smallest", stacklevel=3)
    return min(roots), tuple(sorted(roots))


def implied_ltv(risk_premium: float, term: float, sigma: float) -> ImpliedSolution:
    """Loan-to-value ``d / S0`` consistent with zero expected bank profit.

    Scans ``(1e-8, 1 - 1e-8)`` on a 2,000-interval grid, then bisects each
    sign change. ``delta`` is the bank's hedge ratio ``N(-d1)`` at the root.
    """
    rho, T = risk_premium, term
    if not rho > 0:
        raise ValueError("risk premium must be positive")
    if not (T > 0 and sigma > 0):
        raise ValueError("term and sigma must be positive")
    roots = _scan_roots(
        lambda x: _g(x, rho, T, sigma),
        lambda x: float(_g(x, rho, T, sigma)),
        LTV_EPS, 1.0 - LTV_EPS, SCAN_POINTS, 1e-10, 1e-12,
    )
    x, allr = _pick(roots, "LTV")
    _, denom = _ltv_terms(x, rho, T, sigma)
    if not denom > 0:
        raise NonexistenceError("denominator 1 - N(d2) exp(rho T) is not positive at the root")
    return ImpliedSolution(x, _delta_at(x, rho, T, sigma), ltv_residual(x, rho, T, sigma), x, allr)


def implied_term(risk_premium: float, ltv: float, sigma: float) -> ImpliedSolution:
    """Loan term ``T`` (years) consistent with zero expected bank profit."""
    rho = risk_premium
    if not rho > 0:
        raise ValueError("risk premium must be positive")
    if not 0 < ltv < 1:
        raise ValueError("ltv must lie in (0, 1)")
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    roots = _scan_roots(
        lambda T: _g(ltv, rho, T, sigma),
        lambda T: float(_g(ltv, rho, T, sigma)),
        *TERM_BRACKET, SCAN_POINTS, 1e-10, 1e-12,
    )
    T, allr = _pick(roots, "loan term")
    _, denom = _ltv_terms(ltv, rho, T, sigma)
    if not denom > 0:
        raise NonexistenceError("denominator 1 - N(d2) exp(rho T) is not positive at the root")
    return ImpliedSolution(T, _delta_at(ltv, rho, T, sigma), ltv_residual(ltv, rho, T, sigma), ltv, allr)


def hedge_delta(terms: CallLoanTerms, s_t: float, t: float) -> float:
    """Short position (per unit of collateral) that hedges the bank at ``(S_t, t)``.

    ``N(-d1)`` for the call struck at ``K = d exp(R T)``. Written with the
    current balance ``d_t = d exp(R t)`` this is
    ``N((log(d_t / S_t) + (rho - sigma^2 / 2)(T - t)) / (sigma sqrt(T - t)))``.
    """
    tau = terms.term - t
    if not tau > 0:
        raise ValueError("hedge_delta needs t < T")
    if not s_t > 0:
        raise ValueError("S_t must be positive")
    d1 = _d1(s_t, terms.strike, terms.r, terms.sigma, tau)
    return float(ndtr(-d1))


def mc_zero_profit_check(
    terms: CallLoanTerms,
    n_paths: int = 1_000_000,
    seed: int = 42,
    block: int = 1 << 16,
) -> tuple[float, float]:
    """Monte-Carlo mean and standard error of the discounted bank profit under Q.

    Paths are generated in blocks whose generators are spawned from
    ``SeedSequence(seed)``; block sums are reduced in block order, so the
    result is reproducible regardless of how blocks are scheduled.
    """
    if n_paths < 2:
        raise ValueError("need at least two paths")
    S0, d, K = terms.spot, terms.loan_amount, terms.strike
    r, sigma, T = terms.r, terms.sigma, terms.term
    drift = (r - 0.5 * sigma**2) * T
    vol = sigma * math.sqrt(T)
    disc = math.exp(-r * T)
    n_blocks = -(-n_paths // block)
    children = np.random.SeedSequence(seed).spawn(n_blocks)
    total = total_sq = 0.0
    remaining = n_paths
    for child in children:
        m = min(block, remaining)
        remaining -= m
        z = np.random.Generator(np.random.PCG64(child)).standard_normal(m)
        s_T = S0 * np.exp(drift + vol * z)
        pv = disc * np.minimum(s_T, K) - d
        total += float(pv.sum())
        total_sq += float(pv @ pv)
    mean = total / n_paths
    var = (total_sq - n_paths * mean**2) / (n_paths - 1)
    return mean, math.sqrt(max(var, 0.0) / n_paths)
