"""Histogram, Gaussian kernel density, and sample (partial) autocorrelations.

All dispersion uses a single whole-sample mean and the population variance,
so ``acf`` at lag ``j`` is ``sum_{t>j} (y_t - ybar)(y_{t-j} - ybar) / (T v)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from callrate.errors import DataError, EstimationError
from callrate.series import RateSeries

__all__ = [
    "Histogram",
    "KdeSpec",
    "AcfResult",
    "histogram",
    "kde",
    "kde_constants",
    "acf",
    "pacf",
    "default_kde_grid",
]

_BAND_Z = 1.96


def _as_array(series: RateSeries | Sequence[float]) -> np.ndarray:
    if isinstance(series, RateSeries):
        return series.values
    return np.asarray(series, dtype=float)


@dataclass(frozen=True)
class Histogram:
    bins: list[tuple[float, int]]
    """Non-empty bins as ``(lower_edge, count)``, sorted by edge."""
    overflow: int
    bin_width: float


def histogram(
    series: RateSeries | Sequence[float], bin_width: float = 0.25, max_value: float = 10.0
) -> Histogram:
    """Bin observations on a grid anchored at 0.

    Values above ``max_value`` are left out of ``bins`` and tallied in
    ``overflow`` instead.
    """
    if not bin_width > 0:
        raise ValueError(f"bin width must be positive, got {bin_width}")
    y = _as_array(series)
    keep = y[y <= max_value]
    # the tolerance keeps values like 0.3 / 0.1 = 2.9999999999999996 in the right bin
    idx = np.floor(keep / bin_width + 1e-9).astype(np.int64)
    counts: dict[int, int] = {}
    for k in idx.tolist():
        counts[k] = counts.get(k, 0) + 1
    bins = [(round(k * bin_width, 12), counts[k]) for k in sorted(counts)]
    return Histogram(bins=bins, overflow=int(y.size - keep.size), bin_width=bin_width)


@dataclass(frozen=True)
class KdeSpec:
    bandwidth: float
    grid: np.ndarray

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        object.__setattr__(self, "grid", grid)
        if not self.bandwidth > 0:
            raise ValueError(f"bandwidth must be positive, got {self.bandwidth}")
        if grid.ndim != 1 or np.any(np.diff(grid) <= 0):
            raise ValueError("KDE grid must be strictly increasing")


def default_kde_grid() -> np.ndarray:
    return np.round(np.arange(0, 1201) * 0.01, 10)


def kde_constants(n_obs: int, bandwidth: float) -> tuple[float, float]:
    """Return ``(leading, base)`` such that the Gaussian KDE reads
    ``leading * sum_t base ** ((y - y_t) ** 2)``."""
    leading = 1.0 / (n_obs * bandwidth * math.sqrt(2.0 * math.pi))
    base = math.exp(-1.0 / (2.0 * bandwidth**2))
    return leading, base


def kde(series: RateSeries | Sequence[float], spec: KdeSpec) -> np.ndarray:
    """Gaussian kernel density evaluated on ``spec.grid``.

    Returns an ``(n, 2)`` array of ``(grid point, density)`` rows.
    """
    y = _as_array(series)
    if y.size == 0:
        raise DataError("KDE needs at least one observation")
    h = spec.bandwidth
    leading, _ = kde_constants(y.size, h)
    dens = np.empty_like(spec.grid)
    # chunked so large grids do not build a (grid x T) matrix in one go
    for start in range(0, spec.grid.size, 512):
        g = spec.grid[start : start + 512, None]
        dens[start : start + 512] = np.exp(-0.5 * ((g - y[None, :]) / h) ** 2).sum(axis=1)
    return np.column_stack([spec.grid, leading * dens])


@dataclass(frozen=True)
class AcfResult:
    lags: np.ndarray
    values: np.ndarray
    band: float
    """Half-width of the +-1.96/sqrt(T) significance band."""

    def rows(self) -> list[tuple[int, float, float]]:
        return [(int(j), float(v), self.band) for j, v in zip(self.lags, self.values)]


def acf(series: RateSeries | Sequence[float], max_lag: int) -> AcfResult:
    y = _as_array(series)
    n = y.size
    if max_lag < 0 or max_lag >= n:
        raise ValueError(f"max_lag must be in [0, {n - 1}], got {max_lag}")
    dev = y - y.mean()
    denom = float(dev @ dev)  # equals T * v
    if denom == 0.0:
        raise EstimationError("autocorrelation undefined for a constant series")
    vals = np.array([dev[j:] @ dev[: n - j] for j in range(max_lag + 1)]) / denom
    return AcfResult(np.arange(max_lag + 1), vals, _BAND_Z / math.sqrt(n))


def _durbin_levinson(r: np.ndarray) -> np.ndarray:
    """Partial autocorrelations from autocorrelations ``r[0..p]`` (``r[0] == 1``)."""
    p = r.size - 1
    out = np.empty(p + 1)
    out[0] = 1.0
    if p == 0:
        return out
    phi = np.array([r[1]])
    v = 1.0 - r[1] ** 2
    out[1] = r[1]
    for k in range(2, p + 1):
        if v <= 1e-14:
            raise EstimationError(f"Durbin-Levinson breakdown at lag {k}: singular Toeplitz system")
        a = (r[k] - phi @ r[k - 1 : 0 : -1]) / v
        phi = np.append(phi - a * phi[::-1], a)
        v *= 1.0 - a * a
        out[k] = a
    return out


def pacf(series: RateSeries | Sequence[float], max_lag: int) -> AcfResult:
    """Sample PACF by Durbin-Levinson on the biased ACF; lag 1 equals ACF lag 1."""
    y = _as_array(series)
    if max_lag < 0 or max_lag >= y.size / 2:
        raise ValueError(f"max_lag must be below half the series length ({y.size}), got {max_lag}")
    r = acf(y, max_lag)
    return AcfResult(r.lags, _durbin_levinson(r.values), r.band)
