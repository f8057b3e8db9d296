"""Exception types shared across the package.

The CLI maps these onto exit codes: :class:`DataError` and
:class:`UnitsError` exit with 1, :class:`NonexistenceError` with 3.
"""

from __future__ import annotations


class CallRateError(Exception):
    """Base class for all errors raised by :mod:`callrate`."""


class DataError(CallRateError, ValueError):
    """Input data violates a series invariant.

    ``row`` is the 1-based line number in the source file when known.
    """

    def __init__(self, message: str, row: int | None = None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class UnitsError(CallRateError, ValueError):
    """A value was supplied on the wrong scale (percent vs unit interval)
    or with the wrong compounding convention."""


class EstimationError(CallRateError, ValueError):
    """A fit is degenerate or produced a non-stationary estimate."""


class NonexistenceError(CallRateError, ArithmeticError):
    """A root-finding problem has no solution for the given inputs."""
