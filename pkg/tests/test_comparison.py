import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from kssim.comparison import ScalarSeries, check_domination, integrate_U, integrate_V
from kssim.constants import BranchError, TheoryConstants, theory_constants
from kssim.model import AffineOsc, Constant, ExpDecay, LogGrowth, LogPower

BETA1 = oracles.BETA1_LOG


def flat(value, t_end=10.0, n=11):
    return ScalarSeries(np.linspace(0, t_end, n), np.full(n, value))


class TestSeries:
    def test_validation(self):
        with pytest.raises(ValueError):
            ScalarSeries([0, 1, 1], [1, 2, 3])
        with pytest.raises(ValueError):
            ScalarSeries([0, 1], [1])
        with pytest.raises(ValueError):
            ScalarSeries([], [])

    def test_csv_roundtrip(self, tmp_path):
        s = ScalarSeries([0.0, 0.1, 0.35], [1.0, 2.0, 1 / 3])
        s.to_csv(tmp_path / "s.csv")
        back = ScalarSeries.from_csv(tmp_path / "s.csv")
        assert np.array_equal(back.times, s.times) and np.array_equal(back.values, s.values)

    def test_interp(self):
        assert ScalarSeries([0, 2], [0, 4])(1.5) == 3.0


class TestU:
    def test_closed_form(self):
        u0, t_end = 4.0, 10.0
        U = integrate_U(Constant(1), BETA1, flat(7.0), u0, t_end)
        exact = u0 * np.exp(-U.times) + BETA1 * (1 - np.exp(-U.times))
        assert np.max(np.abs(U.values - exact)) <= 1e-8

    def test_equilibrium(self):
        U = integrate_U(Constant(1), BETA1, flat(0.0), BETA1, 5.0)
        assert np.max(np.abs(U.values - BETA1)) <= 1e-14

    def test_rk4_order(self):
        # error at t = 1 (still transient) against a 10x finer run of the 2000-step case
        def at_one(n):
            s = integrate_U(Constant(1), BETA1, flat(0.0), 4.0, 10.0, n)
            return s.values[np.searchsorted(s.times, 1.0)]

        ref = at_one(20000)
        assert abs(at_one(1000) - ref) / abs(at_one(2000) - ref) >= 14

    @given(st.lists(st.floats(0.0, 8.0), min_size=2, max_size=30), st.floats(0.0, 8.0))
    def test_cap(self, trace, u0):
        # traces kept below the cap itself; with uinf above U the coupling can push U up
        cap = max(u0, BETA1)
        trace = np.minimum(trace, cap)
        uinf = ScalarSeries(np.linspace(0, 10, len(trace)), trace)
        U = integrate_U(LogGrowth(1), BETA1, uinf, u0, 10.0)
        assert np.max(U.values) <= cap + 1e-8

    def test_rejects(self):
        with pytest.raises(ValueError):
            integrate_U(ExpDecay(1), BETA1, flat(1.0), 1.0, 5.0)
        with pytest.raises(ValueError):
            integrate_U(Constant(1), BETA1, flat(1.0, t_end=4.0), 1.0, 5.0)
        with pytest.raises(ValueError):
            integrate_U(Constant(1), BETA1, flat(1.0), 1.0, 5.0, n_steps=10)


class TestV:
    def test_equilibrium_affine(self):
        m = AffineOsc(3, 2)
        c = theory_constants(m, LogPower(1, 1, 1), 2.5)
        trace = ScalarSeries(np.linspace(0, 10, 50), np.linspace(0, c.sstar, 50))
        V = integrate_V(m, c, trace, 10.0)
        assert np.max(np.abs(V.values - c.sstar)) <= 1e-9

    def test_equilibrium_monotone(self):
        m = LogGrowth(1)
        c = theory_constants(m, LogPower(1, 1, 0), 2.0)
        V = integrate_V(m, c, flat(c.sstar), 10.0)
        assert np.max(np.abs(V.values - c.sstar)) <= 1e-9

    def test_grows_when_trace_exceeds(self):
        m = LogGrowth(1)
        c = theory_constants(m, LogPower(1, 1, 0), 2.0)
        V = integrate_V(m, c, flat(c.sstar + 1.0), 1.0)
        assert V.values[-1] > c.sstar

    def test_bounded_branch_rejected(self):
        c = theory_constants(ExpDecay(1), LogPower(1, 1, 0), 2.0)
        with pytest.raises(BranchError):
            integrate_V(ExpDecay(1), c, flat(1.0), 1.0)


class TestDomination:
    def test_equal(self):
        s = flat(1.0)
        r = check_domination(s, s, 0.02)
        assert r.passed and r.max_violation == 0.0

    def test_strictly_below(self):
        up = ScalarSeries(np.linspace(0, 1, 5), np.linspace(2, 3, 5))
        lo = ScalarSeries(up.times, up.values - 1)
        assert check_domination(lo, up, 0.0).passed

    def test_violation_located(self):
        up = flat(1.0)
        lo = ScalarSeries(up.times, np.where(up.times == 4.0, 2.0, 0.0))
        r = check_domination(lo, up, 0.02)
        assert not r.passed and r.t_worst == 4.0 and r.max_violation == pytest.approx(0.5)

    def test_disjoint(self):
        with pytest.raises(ValueError):
            check_domination(ScalarSeries([0, 1], [0, 0]), ScalarSeries([2, 3], [0, 0]), 0.02)
