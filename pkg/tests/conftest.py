import os
from pathlib import Path

import numpy as np
import pytest

from callrate.series import Units, load_csv, to_continuous

HISTORICAL_ENV = "CALLRATE_HISTORICAL_CSV"


def simulate_ar1(alpha, rho, sigma, n, rng, burn=200):
    mu = alpha / (1 - rho)
    y = np.empty(n + burn)
    y[0] = mu
    eps = rng.standard_normal(n + burn)
    for t in range(1, n + burn):
        y[t] = alpha + rho * y[t - 1] + sigma * eps[t]
    return y[burn:]


def simulate_ar2(c, phi1, phi2, sigma, n, rng, burn=200):
    mu = c / (1 - phi1 - phi2)
    y = np.full(n + burn, mu)
    eps = rng.standard_normal(n + burn)
    for t in range(2, n + burn):
        y[t] = c + phi1 * y[t - 1] + phi2 * y[t - 2] + sigma * eps[t]
    return y[burn:]


@pytest.fixture
def rng():
    return np.random.default_rng(20190518)


@pytest.fixture(scope="session")
def historical():
    """The 1857:01-1970:11 call-rate CSV if the user points us at it
    (nominal percent, ``YYYY-MM,value`` rows); continuously compounded."""
    path = os.environ.get(HISTORICAL_ENV)
    if not path or not Path(path).exists():
        pytest.skip(f"set {HISTORICAL_ENV} to the monthly call-rate CSV to run this check")
    return to_continuous(load_csv(path, Units.NOMINAL_PERCENT))


# acceptance verdicts, echoed at the end of the run so they survive output capture
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
