"""Monthly rate series: ingest, validation, unit conversion, summary statistics.

Rates in this module are always in percent per annum (0-100 scale). The
unit-interval scale is only used by :mod:`callrate.margin` and
:mod:`callrate.arbitrage`.
"""

from __future__ import annotations

import csv
import enum
import math
import re
from dataclasses import asdict, dataclass
from os import PathLike
from typing import Iterable, Sequence

import numpy as np

from callrate.errors import DataError, UnitsError

__all__ = [
    "Units",
    "YearMonth",
    "RateSeries",
    "SummaryStats",
    "load_csv",
    "to_continuous",
    "to_nominal",
    "summarize",
]

_DATE_RE = re.compile(r"^\s*(\d{4})-(\d{2})\s*$")


class Units(enum.Enum):
    NOMINAL_PERCENT = "nominal"
    CONTINUOUS_PERCENT = "continuous"


@dataclass(frozen=True, order=True)
class YearMonth:
    year: int
    month: int

    def __post_init__(self):
        if not 1 <= self.month <= 12:
            raise ValueError(f"month out of range: {self.month}")

    @classmethod
    def parse(cls, text: str) -> "YearMonth":
        m = _DATE_RE.match(text)
        if m is None:
            raise ValueError(f"expected YYYY-MM, got {text!r}")
        return cls(int(m.group(1)), int(m.group(2)))

    @property
    def index(self) -> int:
        """Months since year 0, for spacing arithmetic."""
        return self.year * 12 + (self.month - 1)

    @classmethod
    def from_index(cls, index: int) -> "YearMonth":
        return cls(index // 12, index % 12 + 1)

    def __add__(self, months: int) -> "YearMonth":
        return YearMonth.from_index(self.index + months)

    def __str__(self) -> str:
        return f"{self.year:04d}-{self.month:02d}"


@dataclass(frozen=True)
class RateSeries:
    """Ordered, gap-free monthly observations of an annual interest rate.

    ``values`` is stored as a read-only float array. Construction validates
    every invariant, so any ``RateSeries`` in hand is safe to estimate on.
    """

    dates: tuple[YearMonth, ...]
    values: np.ndarray
    units: Units
    label: str = ""

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "dates", tuple(self.dates))
        if values.ndim != 1 or len(values) != len(self.dates):
            raise DataError("dates and values must be 1-D and of equal length")
        for i in range(1, len(self.dates)):
            step = self.dates[i].index - self.dates[i - 1].index
            if step <= 0:
                raise DataError(f"dates not strictly increasing at {self.dates[i]}")
            if step != 1:
                raise DataError(f"month gap between {self.dates[i - 1]} and {self.dates[i]}")
        bad = ~np.isfinite(values)
        if bad.any():
            raise DataError(f"non-finite value at {self.dates[int(np.argmax(bad))]}")
        low = values <= -100.0
        if self.units is Units.NOMINAL_PERCENT and low.any():
            raise DataError(f"value <= -100 at {self.dates[int(np.argmax(low))]}")

    @classmethod
    def from_values(
        cls,
        values: Iterable[float],
        units: Units = Units.CONTINUOUS_PERCENT,
        start: str | YearMonth = "1857-01",
        label: str = "",
    ) -> "RateSeries":
        """Build a series on a consecutive monthly grid beginning at ``start``."""
        values = np.asarray(values if isinstance(values, np.ndarray) else list(values), dtype=float)
        first = YearMonth.parse(start) if isinstance(start, str) else start
        dates = tuple(first + i for i in range(len(values)))
        return cls(dates, values, units, label)

    def __len__(self) -> int:
        return len(self.values)

    def require_units(self, units: Units, what: str) -> None:
        if self.units is not units:
            raise UnitsError(f"{what} requires {units.value} units, got {self.units.value}")


def load_csv(
    path: str | PathLike,
    units: Units = Units.NOMINAL_PERCENT,
    label: str | None = None,
) -> RateSeries:
    """Read ``date,value`` rows (``YYYY-MM`` dates, percent values).

    A single header line is tolerated. Rows are sorted by date before the
    spacing checks, so out-of-order files load but duplicates and gaps are
    rejected with the offending row number.
    """
    rows: list[tuple[YearMonth, float, int]] = []
    with open(path, newline="") as fh:
        for lineno, rec in enumerate(csv.reader(fh), start=1):
            if not rec or all(not f.strip() for f in rec) or rec[0].lstrip().startswith("#"):
                continue
            if len(rec) != 2:
                if not rows and lineno == 1:
                    continue
                raise DataError(f"expected 2 fields, got {len(rec)}", row=lineno)
            try:
                date = YearMonth.parse(rec[0])
            except ValueError as exc:
                if not rows and lineno == 1:
                    continue  # header
                raise DataError(str(exc), row=lineno) from None
            try:
                value = float(rec[1])
            except ValueError:
                raise DataError(f"unparseable value {rec[1]!r}", row=lineno) from None
            if not math.isfinite(value):
                raise DataError(f"non-finite value {rec[1]!r}", row=lineno)
            if value <= -100.0:
                raise DataError(f"value {value} <= -100", row=lineno)
            rows.append((date, value, lineno))

    rows.sort(key=lambda r: r[0])
    for prev, cur in zip(rows, rows[1:]):
        step = cur[0].index - prev[0].index
        if step == 0:
            raise DataError(f"duplicate month {cur[0]}", row=max(prev[2], cur[2]))
        if step != 1:
            raise DataError(f"month gap between {prev[0]} and {cur[0]}", row=cur[2])

    return RateSeries(
        tuple(r[0] for r in rows),
        np.array([r[1] for r in rows], dtype=float),
        units,
        label if label is not None else str(path),
    )


def to_continuous(series: RateSeries) -> RateSeries:
    """Map nominal percent rates to continuously-compounded percent,
    ``100 * log(1 + rate / 100)``."""
    if series.units is not Units.NOMINAL_PERCENT:
        raise UnitsError("series is already continuously compounded")
    return RateSeries(
        series.dates, 100.0 * np.log1p(series.values / 100.0), Units.CONTINUOUS_PERCENT, series.label
    )


def to_nominal(series: RateSeries) -> RateSeries:
    """Inverse of :func:`to_continuous`."""
    if series.units is not Units.CONTINUOUS_PERCENT:
        raise UnitsError("series is already nominal")
    return RateSeries(
        series.dates, 100.0 * np.expm1(series.values / 100.0), Units.NOMINAL_PERCENT, series.label
    )


@dataclass(frozen=True)
class SummaryStats:
    count: int
    mean: float
    min: float
    max: float
    std_dev: float
    mean_abs_dev: float
    p5: float
    median: float
    p95: float

    def to_dict(self) -> dict[str, float | int]:
        return asdict(self)


def summarize(series: RateSeries | Sequence[float]) -> SummaryStats:
    """Descriptive statistics with population (divisor T) dispersion.

    Percentiles interpolate linearly between order statistics.
    """
    y = series.values if isinstance(series, RateSeries) else np.asarray(series, dtype=float)
    if y.size == 0:
        raise DataError("cannot summarize an empty series")
    mean = float(y.mean())
    p5, p50, p95 = np.percentile(y, [5, 50, 95], method="linear")
    return SummaryStats(
        count=int(y.size),
        mean=mean,
        min=float(y.min()),
        max=float(y.max()),
        std_dev=float(y.std(ddof=0)),
        mean_abs_dev=float(np.abs(y - mean).mean()),
        p5=float(p5),
        median=float(p50),
        p95=float(p95),
    )
