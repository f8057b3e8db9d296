"""Published estimates for the U.S. broker call rate, 1857:01-1970:11
(continuously-compounded percent, monthly), and the case-study inputs used
as CLI defaults when no data file is supplied."""

from __future__ import annotations

from callrate.autoregress import Ar1Fit, Ar2Fit
from callrate.margin import STYLIZED_MARKET

__all__ = [
    "CALL_RATE_AR1",
    "CALL_RATE_AR2",
    "STYLIZED_MARKET",
    "RISK_FREE_RATE",
    "QUOTED_CALL_RATE",
    "CALL_LOAN_TERM",
    "COLLATERAL_VOL",
    "HISTORICAL_LENGTH",
]

HISTORICAL_LENGTH = 1367

# long-run mean 3.943, correlation 0.597, RMS residual 2.362
CALL_RATE_AR1 = Ar1Fit.from_mean_form(
    mu=3.943, rho=0.597, sigma=2.362, se_alpha=0.107, se_rho=0.022, r_squared=0.36, n_obs=1366
)

CALL_RATE_AR2 = Ar2Fit(
    c=1.215, phi1=0.456, phi2=0.235, sigma=2.297,
    se_c=0.112, se_phi1=0.026, se_phi2=0.026, r_squared=0.39, n_obs=1365,
)

RISK_FREE_RATE = 0.02088  # 5-year Treasury yield, May 2019
QUOTED_CALL_RATE = 0.0425
CALL_LOAN_TERM = 90 / 365
COLLATERAL_VOL = 0.40
