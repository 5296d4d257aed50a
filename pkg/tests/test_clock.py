from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reverting import verify
from reverting.clock import (
    EULER_GAMMA,
    EXACT_MAX_N,
    backward_reversion_times,
    clock_clt_diagnostic,
    clock_moments,
    clock_paths,
    clock_pmf,
    clock_rho,
    reversion_times_from_draws,
    simulate_clock_bernoulli,
    simulate_clock_recursive,
    stirling_first,
)
from reverting.core import ConfigurationError, Pmf, PowerLaw, RandomStream, SizeError
from reverting.nonuniform import weighted_clock_pmf


class TestExactPmf:
    def test_small_cases(self):
        assert clock_pmf(1).as_dict(exact=True) == {0: 1}
        assert clock_pmf(2).as_dict(exact=True) == {1: 1}
        assert clock_pmf(3).as_dict(exact=True) == {1: Fraction(1, 2), 2: Fraction(1, 2)}
        assert clock_pmf(4).as_dict(exact=True) == {1: Fraction(1, 3), 2: Fraction(1, 2), 3: Fraction(1, 6)}

    @pytest.mark.parametrize("n", range(1, 10))
    def test_matches_enumeration(self, n):
        assert clock_pmf(n).as_dict(exact=True) == verify.enumerate_clock(n).as_dict(exact=True)

    @pytest.mark.parametrize("n", range(1, EXACT_MAX_N))
    def test_pmf_recurrence(self, n):
        # P(T_{n+1} = x) = (1/n) sum_{k<=n} P(T_k = x - 1)
        lhs = clock_pmf(n + 1)
        rhs: dict = {}
        for k in range(1, n + 1):
            for x, p in clock_pmf(k).as_dict(exact=True).items():
                rhs[x + 1] = rhs.get(x + 1, 0) + p / n
        assert lhs.as_dict(exact=True) == rhs

    def test_exact_mode_limit(self):
        with pytest.raises(SizeError):
            clock_pmf(EXACT_MAX_N + 1, tail_tolerance=0)
        assert not clock_pmf(EXACT_MAX_N + 1).is_exact
        with pytest.raises(ConfigurationError):
            clock_pmf(5, tail_tolerance=-1)

    def test_float_agrees_with_exact(self):
        exact = clock_pmf(13)
        approx = clock_pmf(13, tail_tolerance=1e-300)
        assert exact.values == approx.values
        np.testing.assert_allclose(approx.probs, exact.probs, rtol=1e-12)

    @pytest.mark.parametrize("n", [50, 1000, 20000])
    def test_float_moments(self, n):
        pmf = clock_pmf(n)
        mom = clock_moments(n)
        assert pmf.mean() == pytest.approx(mom.mean, rel=1e-10)
        assert pmf.variance() == pytest.approx(mom.variance, rel=1e-8)
        assert pmf.dropped_mass < 1e-10

    def test_tail_tolerance_trims(self):
        pmf = clock_pmf(500, tail_tolerance=1e-6)
        assert min(pmf.probs) >= 1e-6 * 0.99
        assert 0 < pmf.dropped_mass < 1e-4


class TestStirling:
    def test_known_values(self):
        assert [stirling_first(4, k) for k in range(5)] == [0, 6, 11, 6, 1]
        assert stirling_first(0, 0) == 1

    @pytest.mark.parametrize("n", range(1, 13))
    def test_identity(self, n):
        pmf = clock_pmf(n + 1)
        for k in range(n + 1):
            assert pmf.prob(k) == Fraction(stirling_first(n, k), math.factorial(n))

    @given(st.integers(0, 40))
    def test_row_sums_to_factorial(self, n):
        assert sum(stirling_first(n, k) for k in range(n + 1)) == math.factorial(n)

    @pytest.mark.parametrize("n, k", [(3, 4), (-1, 0), (65, 1)])
    def test_bounds(self, n, k):
        with pytest.raises(SizeError):
            stirling_first(n, k)


class TestMoments:
    def test_values(self):
        m = clock_moments(4, exact=True)
        assert (m.mean, m.variance) == (Fraction(11, 6), Fraction(17, 36))
        assert clock_moments(1, exact=True).mean == 0

    def test_recursion_for_mean(self):
        # m_{n+1} = 1 + (1/n) sum_{k<=n} m_k
        means = [clock_moments(k, exact=True).mean for k in range(1, 20)]
        for n in range(1, 19):
            assert means[n] == 1 + sum(means[:n]) / n

    def test_asymptotic_first_order_terms(self):
        n = 10**6
        m = clock_moments(n)
        assert n * (m.mean - math.log(n) - EULER_GAMMA) == pytest.approx(-0.5, abs=1e-3)
        assert n * (m.variance - (math.log(n) + EULER_GAMMA - math.pi**2 / 6)) == pytest.approx(0.5, abs=1e-3)
        assert m.asymptotic_mean == pytest.approx(m.mean, abs=1e-6)

    def test_rho_grows_like_log(self):
        assert clock_rho(2, exact=True) == 0
        ratio = clock_rho(10**6) / math.log(10**6)
        assert 0.8 < ratio < 1.05


class TestSimulation:
    def test_recursive_trajectory_is_consistent(self):
        traj = simulate_clock_recursive(200, RandomStream(1))
        traj.check()
        assert traj.n == 200

    def test_weighted_trajectory(self):
        simulate_clock_recursive(100, RandomStream(2), PowerLaw(1.5)).check()

    @pytest.mark.parametrize("route", ["recursive", "bernoulli"])
    def test_routes_fit_exact_pmf(self, route):
        n, size = 25, 40000
        rng = RandomStream(3)
        if route == "recursive":
            T = clock_paths(n, rng, size)[0][:, -1]
        else:
            T = simulate_clock_bernoulli(n, rng, size)
        assert verify.chi_square(T, clock_pmf(n)).pvalue > 1e-3

    def test_weighted_routes_agree(self):
        law = PowerLaw(1)
        rng = RandomStream(4)
        a = clock_paths(30, rng.spawn(0), 30000, law)[0][:, -1]
        b = simulate_clock_bernoulli(30, rng.spawn(1), 30000, law)
        pmf = weighted_clock_pmf(law, 30)
        assert verify.chi_square(a, pmf).pvalue > 1e-3
        assert verify.chi_square(b, pmf).pvalue > 1e-3

    def test_scalar_and_degenerate(self):
        assert simulate_clock_bernoulli(1, RandomStream(0)) == 0
        assert simulate_clock_bernoulli(2, RandomStream(0)) == 1
        assert isinstance(simulate_clock_bernoulli(10, RandomStream(0)), int)


class TestReversionTimes:
    def test_from_draws(self):
        assert reversion_times_from_draws([1, 0, 1, 1, 0]) == (4, 3, 1)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(1, 60), st.integers(0, 2**32))
    def test_backward_times_decrease_to_one(self, n, seed):
        W = backward_reversion_times(n, RandomStream(seed))
        assert W[-1] == 1
        assert all(b < a for a, b in zip(W, W[1:]))
        assert W[0] <= n

    def test_first_time_is_uniform(self):
        n = 6
        rng = RandomStream(5)
        first = [backward_reversion_times(n, rng.spawn(i))[0] for i in range(6000)]
        counts = np.bincount(first, minlength=n + 1)[1:]
        assert verify.chi_square(dict(enumerate(counts, 1)), Pmf.from_exact({k: Fraction(1, n) for k in range(1, n + 1)})).pvalue > 1e-3

    def test_count_has_clock_law(self):
        n = 12
        rng = RandomStream(6)
        counts = [len(backward_reversion_times(n, rng.spawn(i))) for i in range(8000)]
        assert verify.chi_square(counts, clock_pmf(n + 1)).pvalue > 1e-3


class TestCLT:
    def test_ks_decreases(self):
        ks = [clock_clt_diagnostic(n).ks for n in (100, 1000, 10000)]
        assert ks[0] > ks[1] > ks[2]

    def test_lattice_floor(self):
        # no KS distance of a lattice law can beat half its largest atom
        d = clock_clt_diagnostic(10**4)
        pmf = clock_pmf(10**4)
        sup = verify.ks_statistic(pmf, d.mean, math.sqrt(d.variance), convention="sup")
        assert sup >= d.max_atom / 2
        assert sup >= d.ks

    def test_needs_three(self):
        with pytest.raises(ConfigurationError):
            clock_clt_diagnostic(2)
