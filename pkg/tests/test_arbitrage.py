import math
import warnings

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from callrate.arbitrage import (
    REG_T_NOTE,
    CallLoanTerms,
    CreditEvent,
    bank_expected_profit,
    bank_payoff,
    bs_call,
    hedge_delta,
    implied_ltv,
    implied_term,
    ltv_residual,
    mc_zero_profit_check,
    norm_cdf,
)
from callrate.errors import NonexistenceError

R = 0.02088
CALL = 0.0425
RHO = CALL - R
T90 = 90 / 365


def payoff_terms(**kw):
    base = dict(r=R, term=T90, sigma=0.4, call_rate=CALL, s0=100.0, call_loan=60.0,
                margin_loan=80.0, margin_rate=0.08)
    base.update(kw)
    return CallLoanTerms(**base)


class TestNormCdf:
    @pytest.mark.parametrize("x", [-30, -8, -3.5, -1, -1e-3, 0, 0.5, 1.959964, 3, 8, 12])
    def test_against_mpmath(self, x):
        mpmath.mp.dps = 40
        ref = float(mpmath.ncdf(x))
        assert abs(norm_cdf(x) - ref) < 1e-12
        if x < 0:
            assert norm_cdf(x) == pytest.approx(ref, rel=1e-12)

    def test_against_quadrature(self):
        for x in (-2.0, 0.3, 1.959964):
            q, _ = quad(lambda u: math.exp(-u * u / 2) / math.sqrt(2 * math.pi), -np.inf, x)
            assert norm_cdf(x) == pytest.approx(q, abs=1e-12)

    def test_reference_points(self):
        assert norm_cdf(0.0) == 0.5
        assert norm_cdf(1.959964) == pytest.approx(0.975, abs=1e-7)
        assert norm_cdf(8.0) < 1.0
        assert 1 - norm_cdf(8.0) == pytest.approx(6.2e-16, abs=1.2e-16)

    @given(st.floats(-30, 30))
    def test_symmetry_and_monotone(self, x):
        assert norm_cdf(-x) == pytest.approx(1 - norm_cdf(x), abs=1e-14)
        assert norm_cdf(x + 0.01) >= norm_cdf(x)


class TestBsCall:
    def test_limits(self):
        assert bs_call(100.0, 0.0, 1e-12, 0.05, 0.2, 1.0) == pytest.approx(100.0, rel=1e-12)
        assert bs_call(100.0, 0.0, 90.0, 0.0, 1e-8, 1.0) == pytest.approx(10.0, abs=1e-9)

    def test_against_mc(self):
        z = np.random.default_rng(123).standard_normal(1_000_000)
        s_T = 100 * np.exp(0.05 - 0.02 + 0.2 * z)
        pv = math.exp(-0.05) * np.maximum(s_T - 100, 0)
        se = pv.std(ddof=1) / math.sqrt(pv.size)
        price = bs_call(100.0, 0.0, 100.0, 0.05, 0.2, 1.0)
        assert abs(pv.mean() - price) < 3 * se
        assert price == pytest.approx(10.450583572185565, abs=1e-12)

    @settings(max_examples=300)
    @given(
        st.floats(1, 500), st.floats(1, 500), st.floats(-0.05, 0.2), st.floats(0.01, 1.5), st.floats(0.01, 10)
    )
    def test_bounds(self, S, K, r, sigma, tau):
        c = bs_call(S, 0.0, K, r, sigma, tau)
        assert max(S - K * math.exp(-r * tau), 0) - 1e-9 * S <= c <= S + 1e-9 * S

    def test_vectorized(self):
        out = bs_call(np.array([90.0, 100.0, 110.0]), 0.0, 100.0, 0.01, 0.3, 0.5)
        assert out.shape == (3,) and np.all(np.diff(out) > 0)

    @pytest.mark.parametrize("args", [(0, 0, 1, 0, 0.2, 1), (1, 0, 0, 0, 0.2, 1), (1, 0, 1, 0, 0, 1), (1, 1, 1, 0, 0.2, 1)])
    def test_domain(self, args):
        with pytest.raises(ValueError):
            bs_call(*args)


class TestTerms:
    def test_premium_and_call_rate(self):
        a = CallLoanTerms(r=R, term=1.0, sigma=0.4, call_rate=CALL)
        b = CallLoanTerms(r=R, term=1.0, sigma=0.4, risk_premium=RHO)
        assert a.risk_premium == pytest.approx(RHO, abs=1e-16)
        assert b.call_rate == pytest.approx(CALL, abs=1e-16)

    @pytest.mark.parametrize(
        "kw",
        [
            dict(call_rate=CALL, risk_premium=RHO),
            dict(),
            dict(call_rate=CALL, ltv=1.2),
            dict(call_rate=CALL, s0=100, call_loan=60, margin_loan=50),
            dict(call_rate=CALL, margin_rate=0.03),
        ],
    )
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            CallLoanTerms(r=R, term=1.0, sigma=0.4, **kw)


class TestPayoff:
    def test_upper_branch(self):
        t = payoff_terms()
        pi, ev = bank_payoff(t, 1e6)
        assert pi == pytest.approx(60 * (math.exp(CALL * T90) - math.exp(R * T90)), rel=1e-12)
        assert pi > 0 and ev is CreditEvent.NO_DEFAULT

    def test_total_loss(self):
        pi, ev = bank_payoff(payoff_terms(), 0.0)
        assert pi == pytest.approx(-60 * math.exp(R * T90), rel=1e-14)
        assert ev is CreditEvent.CASCADED_DEFAULT

    def test_kink(self):
        t = payoff_terms()
        K = t.strike
        left, ev_left = bank_payoff(t, math.nextafter(K, 0))
        at, ev_at = bank_payoff(t, K)
        assert at == pytest.approx(left, abs=1e-9)
        assert ev_at is CreditEvent.CLIENT_DEFAULTS_ONLY
        assert ev_left is CreditEvent.CASCADED_DEFAULT

    def test_event_thresholds(self):
        t = payoff_terms()
        owed = 80 * math.exp(0.08 * T90)
        assert bank_payoff(t, owed)[1] is CreditEvent.NO_DEFAULT
        assert bank_payoff(t, math.nextafter(owed, 0))[1] is CreditEvent.CLIENT_DEFAULTS_ONLY

    def test_identity_random_draws(self):
        rng = np.random.default_rng(99)
        for _ in range(100_000 // 100):
            s0 = rng.uniform(10, 1000)
            d = s0 * rng.uniform(0.05, 0.8)
            D = rng.uniform(d * 1.01, s0 * 0.99)
            r = rng.uniform(0, 0.1)
            t = CallLoanTerms(r=r, term=rng.uniform(0.05, 3), sigma=0.3, call_rate=r + rng.uniform(0.001, 0.05),
                              s0=s0, call_loan=d, margin_loan=D, margin_rate=0.2)
            for s_T in rng.uniform(0, 2 * s0, 100):
                pi, _ = bank_payoff(t, float(s_T))
                alt = s_T - d * math.exp(t.r * t.term) - max(s_T - t.strike, 0.0)
                assert abs(pi - alt) < 1e-9 * max(1.0, s0)

    def test_requires_currency_fields(self):
        with pytest.raises(ValueError):
            bank_payoff(CallLoanTerms(r=R, term=1.0, sigma=0.4, call_rate=CALL, ltv=0.5), 1.0)
        with pytest.raises(ValueError):
            bank_payoff(payoff_terms(), -1.0)


class TestImpliedLtv:
    def test_case_study(self):
        sol = implied_ltv(RHO, T90, 0.4)
        assert sol.value == pytest.approx(0.723, abs=0.005)
        assert sol.delta == pytest.approx(0.044, abs=0.005)
        assert abs(sol.residual) < 1e-10
        assert sol.reg_t_violation
        assert sol.to_dict()["note"] == REG_T_NOTE
        assert len(sol.roots) == 1

    def test_frozen_root(self):
        # independent mpmath root of the zero-profit equation
        mpmath.mp.dps = 30
        rho, T, s = mpmath.mpf(RHO), mpmath.mpf(90) / 365, mpmath.mpf("0.4")

        def g(x):
            md1 = (mpmath.log(x) + (rho - s**2 / 2) * T) / (s * mpmath.sqrt(T))
            d2 = -md1 - s * mpmath.sqrt(T)
            return x * (1 - mpmath.ncdf(d2) * mpmath.exp(rho * T)) - mpmath.ncdf(md1)

        ref = float(mpmath.findroot(g, 0.72))
        assert implied_ltv(RHO, T90, 0.4).value == pytest.approx(ref, abs=1e-9)

    def test_nonexistence_without_risk(self):
        with pytest.raises(NonexistenceError, match="does not exist"):
            implied_ltv(RHO, T90, 1e-6)

    def test_input_validation(self):
        with pytest.raises(ValueError):
            implied_ltv(0.0, T90, 0.4)
        with pytest.raises(ValueError):
            implied_ltv(RHO, 0.0, 0.4)

    def test_invariance_to_level_and_scale(self):
        base = implied_ltv(RHO, T90, 0.4).value
        for shift in (-0.01, 0.03):
            t = CallLoanTerms(r=R + shift, term=T90, sigma=0.4, call_rate=CALL + shift)
            assert implied_ltv(t.risk_premium, T90, 0.4).value == pytest.approx(base, abs=1e-12)
        # zero expected profit scales with (d, S0)
        for scale in (1.0, 37.5):
            t = CallLoanTerms(r=R, term=T90, sigma=0.4, call_rate=CALL, s0=scale, call_loan=base * scale)
            assert bank_expected_profit(t) == pytest.approx(0.0, abs=1e-12 * scale)

    def test_call_rate_grid_monotone(self):
        calls = np.arange(0.025, 0.0801, 0.0025)
        sols = [implied_ltv(c - R, T90, 0.4) for c in calls]
        ltvs = [s.value for s in sols]
        deltas = [s.delta for s in sols]
        # a richer premium supports more lending per unit of collateral
        assert all(b > a for a, b in zip(ltvs, ltvs[1:]))
        assert all(b > a for a, b in zip(deltas, deltas[1:]))

    def test_expected_profit_rises_with_call_rate(self):
        profits = [
            bank_expected_profit(CallLoanTerms(r=R, term=T90, sigma=0.4, call_rate=c, ltv=0.7))
            for c in (0.03, 0.04, 0.05)
        ]
        assert profits[0] < profits[1] < profits[2]

    def test_residual_property(self):
        for rho in (0.001, 0.01, 0.05, 0.2):
            for T in (0.05, 0.5, 2.0):
                try:
                    sol = implied_ltv(rho, T, 0.4)
                except NonexistenceError:
                    continue
                assert abs(sol.residual) < 1e-10
                assert abs(ltv_residual(sol.value, rho, T, 0.4)) < 1e-10

    def test_multiple_roots_warn(self, monkeypatch):
        import callrate.arbitrage as arb

        root = implied_ltv(RHO, T90, 0.4).value
        monkeypatch.setattr(arb, "_scan_roots", lambda *a, **k: [0.9, root])
        with warnings.catch_warnings(record=True) as w:
            warnings.simplefilter("always")
            sol = arb.implied_ltv(RHO, T90, 0.4)
        assert sol.value == root and sol.roots == (root, 0.9)
        assert any("roots" in str(x.message) for x in w)
        assert "all_roots" in sol.to_dict()


class TestImpliedTerm:
    def test_case_study(self):
        sol = implied_term(RHO, 0.5, 0.4)
        assert sol.value == pytest.approx(1.75, abs=0.05)
        assert sol.delta == pytest.approx(0.066, abs=0.005)
        assert abs(sol.residual) < 1e-10
        assert not sol.reg_t_violation

    def test_consistent_with_ltv_solver(self):
        sol = implied_term(RHO, 0.5, 0.4)
        assert implied_ltv(RHO, sol.value, 0.4).value == pytest.approx(0.5, abs=1e-8)

    def test_input_validation(self):
        with pytest.raises(ValueError):
            implied_term(RHO, 1.0, 0.4)
        with pytest.raises(NonexistenceError):
            implied_term(RHO, 0.5, 1e-6)


class TestHedgeDelta:
    def test_case_study(self):
        ltv = implied_ltv(RHO, T90, 0.4).value
        t = CallLoanTerms(r=R, term=T90, sigma=0.4, call_rate=CALL, ltv=ltv)
        assert hedge_delta(t, 1.0, 0.0) == pytest.approx(0.044, abs=0.005)

    def test_unleveraged_limit(self):
        t = CallLoanTerms(r=R, term=T90, sigma=0.4, call_rate=CALL, ltv=1e-9)
        assert hedge_delta(t, 1.0, 0.0) < 1e-12

    def test_finite_difference(self):
        rng = np.random.default_rng(2024)
        worst = 0.0
        for _ in range(100):
            r = rng.uniform(0.0, 0.08)
            T = rng.uniform(0.1, 3.0)
            t_now = rng.uniform(0, 0.9) * T
            terms = CallLoanTerms(r=r, term=T, sigma=rng.uniform(0.1, 0.8),
                                  risk_premium=rng.uniform(0.001, 0.05), ltv=rng.uniform(0.1, 0.9))
            S = rng.uniform(0.5, 2.0)
            K, d = terms.strike, terms.loan_amount

            def value(s):
                return s - d * math.exp(r * t_now) - bs_call(s, t_now, K, r, terms.sigma, T)

            h = 1e-5 * S
            fd = (value(S + h) - value(S - h)) / (2 * h)
            worst = max(worst, abs(hedge_delta(terms, S, t_now) - fd))
        assert worst < 1e-6

    def test_time_form(self):
        terms = CallLoanTerms(r=R, term=1.0, sigma=0.4, call_rate=CALL, ltv=0.6)
        t, S = 0.3, 0.9
        d_t = 0.6 * math.exp(CALL * t)
        arg = (math.log(d_t / S) + (RHO - 0.08) * 0.7) / (0.4 * math.sqrt(0.7))
        assert hedge_delta(terms, S, t) == pytest.approx(norm_cdf(arg), abs=1e-14)

    def test_past_maturity(self):
        terms = CallLoanTerms(r=R, term=1.0, sigma=0.4, call_rate=CALL, ltv=0.6)
        with pytest.raises(ValueError):
            hedge_delta(terms, 1.0, 1.0)


class TestMonteCarlo:
    def test_zero_profit_at_root(self):
        ltv = implied_ltv(RHO, T90, 0.4).value
        t = CallLoanTerms(r=R, term=T90, sigma=0.4, call_rate=CALL, ltv=ltv)
        mean, se = mc_zero_profit_check(t, 1_000_000, seed=42)
        assert abs(mean) < 3 * se

    def test_overcollateralized_earns_rent(self):
        t = CallLoanTerms(r=R, term=T90, sigma=0.4, call_rate=CALL, ltv=0.60)
        mean, se = mc_zero_profit_check(t, 1_000_000, seed=42)
        assert mean > 5 * se
        assert mean == pytest.approx(bank_expected_profit(t), abs=4 * se)

    def test_near_deterministic_premium(self):
        t = CallLoanTerms(r=R, term=T90, sigma=1e-6, call_rate=CALL, ltv=0.7)
        mean, _ = mc_zero_profit_check(t, 10_000, seed=1)
        assert mean == pytest.approx(0.7 * (math.exp((CALL - R) * T90) - 1), rel=1e-4)
        assert mean > 0

    def test_reproducible(self):
        t = CallLoanTerms(r=R, term=T90, sigma=0.4, call_rate=CALL, ltv=0.6)
        assert mc_zero_profit_check(t, 200_000, seed=5) == mc_zero_profit_check(t, 200_000, seed=5)
        assert mc_zero_profit_check(t, 200_000, seed=5) != mc_zero_profit_check(t, 200_000, seed=6)
