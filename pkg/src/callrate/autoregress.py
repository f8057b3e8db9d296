"""OLS estimation of AR(1)/AR(2) models, closed-form forecasts, impulse responses.

Residual scale ``sigma`` is the root-mean-squared residual over the usable
observations (divisor ``n``, not ``n - k``). Coefficient standard errors are
the classical homoskedastic ones, ``SSR / (n - k) * (X'X)^-1``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from callrate.errors import EstimationError
from callrate.series import RateSeries, Units

__all__ = [
    "Ar1Fit",
    "Ar2Fit",
    "Forecast",
    "MIN_LENGTH",
    "fit_ar1",
    "fit_ar2",
    "forecast_ar1",
    "forecast_ar2",
    "ar2_recursion",
    "impulse_response",
]

MIN_LENGTH = 30
Z_95 = 1.96
REPEATED_ROOT_TOL = 1e-10


@dataclass(frozen=True)
class Ar1Fit:
    """``y[t+1] = alpha + rho * y[t] + sigma * eps[t]``."""

    alpha: float
    rho: float
    sigma: float
    se_alpha: float = math.nan
    se_rho: float = math.nan
    r_squared: float = math.nan
    n_obs: int = 0
    abs_residual_stats: dict[str, float] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not abs(self.rho) < 1:
            raise EstimationError(f"non-stationary AR(1): rho={self.rho}")

    @classmethod
    def from_mean_form(cls, mu: float, rho: float, sigma: float, **kw) -> "Ar1Fit":
        """Build from ``y[t+1] - mu = rho (y[t] - mu) + sigma eps``."""
        return cls(alpha=(1.0 - rho) * mu, rho=rho, sigma=sigma, **kw)

    @classmethod
    def from_long_run(cls, mu: float, rho: float, s: float, **kw) -> "Ar1Fit":
        """Build from the long-run mean and long-run standard deviation."""
        return cls.from_mean_form(mu, rho, s * math.sqrt(1.0 - rho * rho), **kw)

    @property
    def theta(self) -> float:
        return 1.0 - self.rho

    @property
    def mu(self) -> float:
        return self.alpha / self.theta

    @property
    def s(self) -> float:
        return self.sigma / math.sqrt(1.0 - self.rho**2)

    @property
    def lag_root(self) -> float:
        return 1.0 / self.rho

    def conf_int(self, name: str) -> tuple[float, float]:
        est, se = getattr(self, name), getattr(self, f"se_{name}")
        return est - Z_95 * se, est + Z_95 * se

    def to_dict(self) -> dict[str, float]:
        return {
            "alpha": self.alpha,
            "se_alpha": self.se_alpha,
            "rho": self.rho,
            "se_rho": self.se_rho,
            "lag_root": self.lag_root,
            "theta": self.theta,
            "mu": self.mu,
            "sigma": self.sigma,
            "s": self.s,
            "r_squared": self.r_squared,
            "n_obs": self.n_obs,
            **self.abs_residual_stats,
        }


@dataclass(frozen=True)
class Ar2Fit:
    """``y[t+1] = c + phi1 * y[t] + phi2 * y[t-1] + sigma * eps[t]``."""

    c: float
    phi1: float
    phi2: float
    sigma: float
    se_c: float = math.nan
    se_phi1: float = math.nan
    se_phi2: float = math.nan
    r_squared: float = math.nan
    n_obs: int = 0
    abs_residual_stats: dict[str, float] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        p1, p2 = self.phi1, self.phi2
        if not (p2 < 1 + p1 and p2 < 1 - p1 and abs(p2) < 1):
            raise EstimationError(f"non-stationary AR(2): phi1={p1}, phi2={p2}")

    @property
    def mu(self) -> float:
        return self.c / (1.0 - self.phi1 - self.phi2)

    @property
    def v(self) -> float:
        p1, p2 = self.phi1, self.phi2
        return (1 - p2) * self.sigma**2 / ((1 + p2) * ((1 - p2) ** 2 - p1**2))

    @property
    def s(self) -> float:
        return math.sqrt(self.v)

    @property
    def roots(self) -> tuple[complex | float, complex | float]:
        """Roots of ``lambda^2 - phi1 lambda - phi2``, larger real part first."""
        disc = self.phi1**2 + 4 * self.phi2
        if disc >= 0:
            sq = math.sqrt(disc)
            return (self.phi1 + sq) / 2, (self.phi1 - sq) / 2
        sq = cmath.sqrt(disc)
        return (self.phi1 + sq) / 2, (self.phi1 - sq) / 2

    @property
    def lag_roots(self) -> tuple[complex | float, complex | float]:
        """Roots of the lag polynomial ``1 - phi1 L - phi2 L^2`` (reciprocals of :attr:`roots`)."""
        l1, l2 = self.roots
        return 1 / l1, 1 / l2

    def conf_int(self, name: str) -> tuple[float, float]:
        est, se = getattr(self, name), getattr(self, f"se_{name}")
        return est - Z_95 * se, est + Z_95 * se

    def to_dict(self) -> dict[str, float | str]:
        l1, l2 = self.roots
        g1, g2 = self.lag_roots
        return {
            "c": self.c,
            "se_c": self.se_c,
            "phi1": self.phi1,
            "se_phi1": self.se_phi1,
            "phi2": self.phi2,
            "se_phi2": self.se_phi2,
            "mu": self.mu,
            "sigma": self.sigma,
            "v": self.v,
            "s": self.s,
            "r_squared": self.r_squared,
            "n_obs": self.n_obs,
            "char_root_1": _fmt_root(l1),
            "char_root_2": _fmt_root(l2),
            "lag_root_1": _fmt_root(g1),
            "lag_root_2": _fmt_root(g2),
            **self.abs_residual_stats,
        }


def _fmt_root(z):
    return z if isinstance(z, float) else str(complex(z))


@dataclass(frozen=True)
class Forecast:
    horizon: int
    point: float
    rmse: float


def _ols(X: np.ndarray, y: np.ndarray):
    n, k = X.shape
    q, r = np.linalg.qr(X)
    diag = np.abs(np.diag(r))
    if diag.min() <= 1e-10 * diag.max():
        raise EstimationError("degenerate regressors: design matrix is (near) rank deficient")
    beta = np.linalg.solve(r, q.T @ y)
    resid = y - X @ beta
    ssr = float(resid @ resid)
    rinv = np.linalg.inv(r)
    cov = ssr / (n - k) * (rinv @ rinv.T)
    dev = y - y.mean()
    r2 = 1.0 - ssr / float(dev @ dev)
    absres = np.abs(resid)
    p5, p50, p95 = np.percentile(absres, [5, 50, 95])
    stats = {
        "mean_abs_residual": float(absres.mean()),
        "p5_abs_residual": float(p5),
        "median_abs_residual": float(p50),
        "p95_abs_residual": float(p95),
    }
    return beta, np.sqrt(np.diag(cov)), math.sqrt(ssr / n), r2, stats


def _check_input(series: RateSeries | np.ndarray, what: str) -> np.ndarray:
    if isinstance(series, RateSeries):
        series.require_units(Units.CONTINUOUS_PERCENT, what)
        y = series.values
    else:
        y = np.asarray(series, dtype=float)
    if y.size < MIN_LENGTH:
        raise EstimationError(f"{what} needs at least {MIN_LENGTH} observations, got {y.size}")
    return y


def fit_ar1(series: RateSeries | np.ndarray) -> Ar1Fit:
    """Regress ``y[t+1]`` on ``(1, y[t])`` by OLS.

    Accepts a continuously-compounded :class:`RateSeries` or a bare array
    (taken as already being on the right scale).
    """
    y = _check_input(series, "fit_ar1")
    X = np.column_stack([np.ones(y.size - 1), y[:-1]])
    beta, se, sigma, r2, stats = _ols(X, y[1:])
    try:
        return Ar1Fit(
            alpha=float(beta[0]),
            rho=float(beta[1]),
            sigma=sigma,
            se_alpha=float(se[0]),
            se_rho=float(se[1]),
            r_squared=r2,
            n_obs=y.size - 1,
            abs_residual_stats=stats,
        )
    except EstimationError as exc:
        raise EstimationError(f"fit_ar1: {exc}") from None


def fit_ar2(series: RateSeries | np.ndarray) -> Ar2Fit:
    """Regress ``y[t+1]`` on ``(1, y[t], y[t-1])`` by OLS."""
    y = _check_input(series, "fit_ar2")
    X = np.column_stack([np.ones(y.size - 2), y[1:-1], y[:-2]])
    beta, se, sigma, r2, stats = _ols(X, y[2:])
    try:
        return Ar2Fit(
            c=float(beta[0]),
            phi1=float(beta[1]),
            phi2=float(beta[2]),
            sigma=sigma,
            se_c=float(se[0]),
            se_phi1=float(se[1]),
            se_phi2=float(se[2]),
            r_squared=r2,
            n_obs=y.size - 2,
            abs_residual_stats=stats,
        )
    except EstimationError as exc:
        raise EstimationError(f"fit_ar2: {exc}") from None


def forecast_ar1(fit: Ar1Fit, y0: float, horizon: int) -> list[Forecast]:
    """Conditional mean ``mu + rho^t (y0 - mu)`` and RMSE ``s sqrt(1 - rho^(2t))``."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    mu, rho, s = fit.mu, fit.rho, fit.s
    return [
        Forecast(t, mu + rho**t * (y0 - mu), s * math.sqrt(1.0 - rho ** (2 * t)))
        for t in range(1, horizon + 1)
    ]


def ar2_recursion(fit: Ar2Fit, y0: float, y1: float, horizon: int) -> np.ndarray:
    """Deterministic forward iteration of the AR(2) mean equation.

    Element ``h - 1`` is the forecast ``h`` steps after ``y1``.
    """
    prev, cur = y0, y1
    out = np.empty(horizon)
    for h in range(horizon):
        prev, cur = cur, fit.c + fit.phi1 * cur + fit.phi2 * prev
        out[h] = cur
    return out


def _ar2_closed_form(fit: Ar2Fit, y0: float, y1: float, t: int) -> float:
    # t indexes the series with y0 at t=0 and y1 at t=1
    mu = fit.mu
    a0, a1 = y0 - mu, y1 - mu
    l1, l2 = fit.roots
    if abs(l1 - l2) < REPEATED_ROOT_TOL:
        lam = ((l1 + l2) / 2).real if isinstance(l1, complex) else (l1 + l2) / 2
        # (A + B t) lam^t with A = a0, (A + B) lam = a1, written without dividing by lam
        dev = (1 - t) * a0 * lam**t + (t * a1 * lam ** (t - 1) if t >= 1 else 0.0)
        return float(mu + dev)
    val = ((l2 * a0 - a1) * l1**t + (a1 - l1 * a0) * l2**t) / (l2 - l1)
    return float(mu + (val.real if isinstance(val, complex) else val))


def _psi(fit: Ar2Fit, horizon: int) -> np.ndarray:
    psi = np.empty(horizon + 1)
    psi[0] = 1.0
    if horizon >= 1:
        psi[1] = fit.phi1
    for t in range(2, horizon + 1):
        psi[t] = fit.phi1 * psi[t - 1] + fit.phi2 * psi[t - 2]
    return psi


def forecast_ar2(
    fit: Ar2Fit, y0: float, y1: float, horizon: int, check: bool = True
) -> list[Forecast]:
    """Closed-form AR(2) forecast given the two most recent values ``y0, y1``
    (``y1`` is the latest).

    The RMSE accumulates the MA(infinity) weights: ``sigma sqrt(sum_{j<h} psi_j^2)``.
    With ``check`` the closed form is compared against the forward recursion.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    points = np.array([_ar2_closed_form(fit, y0, y1, h + 1) for h in range(1, horizon + 1)])
    if check:
        rec = ar2_recursion(fit, y0, y1, horizon)
        scale = max(1.0, float(np.abs(rec).max()))
        if np.abs(points - rec).max() > 1e-9 * scale:
            raise ArithmeticError("AR(2) closed form disagrees with the recursion")
    cum = np.sqrt(np.cumsum(_psi(fit, horizon - 1) ** 2)) * fit.sigma
    return [Forecast(h, float(points[h - 1]), float(cum[h - 1])) for h in range(1, horizon + 1)]


def impulse_response(fit: Ar1Fit | Ar2Fit, horizon: int) -> list[tuple[int, float]]:
    """Response in basis points to a 100 bp shock, for ``t = 0..horizon``."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if isinstance(fit, Ar1Fit):
        resp = [100.0 * fit.rho**t for t in range(horizon + 1)]
    else:
        resp = (100.0 * _psi(fit, horizon)).tolist()
    return list(enumerate(resp))
