from __future__ import annotations

import cmath
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reverting import verify
from reverting.clock import clock_pmf
from reverting.core import ConfigurationError, InvariantError, Occasional, RandomStream, SizeError
from reverting.occasional import (
    OccasionalTrace,
    backward_chain_marginals,
    backward_chain_pmf,
    backward_chain_sample,
    backward_transitions,
    correction_weights,
    dobrushin_diagnostic,
    occasional_bivariate_gf,
    occasional_gf_series,
    occasional_martingale_paths,
    occasional_martingale_trace,
    occasional_mean_recursion,
    occasional_moments,
    occasional_pmf,
    occasional_second_moment_differenced,
    occasional_walk_cf,
    reversion_correction,
    sample_occasional,
    simulate_occasional,
)

HALF = Fraction(1, 2)
rational_q = st.fractions(Fraction(1, 20), 1, max_denominator=20)


class TestPmf:
    def test_spec_example(self):
        assert occasional_pmf(3, HALF).as_dict(exact=True) == {1: Fraction(1, 4), 2: Fraction(3, 4)}

    def test_q_one_is_uniform_clock(self):
        for n in range(1, 12):
            assert occasional_pmf(n, 1).as_dict(exact=True) == clock_pmf(n).as_dict(exact=True)

    @pytest.mark.parametrize("n", range(1, 9))
    @pytest.mark.parametrize("q", [Fraction(1, 4), HALF, Fraction(5, 6)])
    def test_matches_enumeration(self, n, q):
        assert occasional_pmf(n, q).as_dict(exact=True) == verify.enumerate_clock(n, Occasional(q)).as_dict(exact=True)

    def test_float_mode(self):
        exact = occasional_pmf(13, Fraction(3, 10))
        approx = occasional_pmf(13, 0.3, tail_tolerance=1e-300)
        np.testing.assert_allclose([approx[x] for x in exact.values], exact.probs, rtol=1e-10)
        big = occasional_pmf(3000, 0.3)
        m = occasional_moments(3000, 0.3)
        assert big.mean() == pytest.approx(m.mean, rel=1e-9)
        assert big.variance() == pytest.approx(m.variance, rel=1e-6)

    def test_errors(self):
        with pytest.raises(SizeError):
            occasional_pmf(14, HALF, tail_tolerance=0)
        with pytest.raises(ConfigurationError):
            occasional_pmf(3, 0)

    def test_simulation_fits(self):
        T = sample_occasional(20, 0.4, RandomStream(1), 40000)
        assert verify.chi_square(T, occasional_pmf(20, 0.4)).pvalue > 1e-3


class TestGeneratingFunction:
    @settings(max_examples=30, deadline=None)
    @given(st.floats(0.05, 0.95), st.floats(0.0, 0.6), st.floats(0.1, 0.9))
    def test_closed_form_matches_series(self, s, z, q):
        assert occasional_bivariate_gf(s, z, q) == pytest.approx(occasional_gf_series(s, z, q), abs=1e-8)

    def test_unit_s_gives_geometric_series(self):
        assert occasional_bivariate_gf(1.0, 0.3, 0.5) == pytest.approx(1 / 0.7)

    def test_complex_argument(self):
        theta, z, q = 0.7, 0.4, 0.3
        phi = cmath.exp(1j * theta)
        direct = sum(z ** (k - 1) * sum(p * phi**t for t, p in zip(occasional_pmf(k, q).values, occasional_pmf(k, q).probs)) for k in range(1, 60))
        assert abs(occasional_walk_cf(theta, z, q) - direct) < 1e-10

    def test_rejects_bad_arguments(self):
        with pytest.raises(ConfigurationError):
            occasional_bivariate_gf(0.5, 1.0, 0.5)
        with pytest.raises(ConfigurationError):
            occasional_bivariate_gf(1.5, 0.2, 0.5)


class TestMoments:
    def test_spec_example(self):
        assert occasional_moments(3, HALF).mean == Fraction(7, 4)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(1, 12), rational_q)
    def test_exact_against_pmf(self, n, q):
        pmf, mom = occasional_pmf(n, q), occasional_moments(n, q)
        assert mom.mean == pmf.mean()
        assert mom.variance == pmf.variance()
        assert occasional_mean_recursion(n, q) == mom.mean

    @pytest.mark.parametrize("q", [Fraction(1, 3), Fraction(3, 4)])
    def test_differenced_second_moment(self, q):
        for n in range(1, 40):
            assert occasional_second_moment_differenced(n, q) == pytest.approx(float(occasional_moments(n, q).second_moment), rel=1e-12)

    def test_mean_asymptotics(self):
        q, n = 0.25, 10**6
        m = occasional_moments(n + 1, q).mean
        assert m == pytest.approx((math.log(n) + 0.5772156649015329 + math.log(q)) / q, abs=1e-4)

    def test_ratio_tends_to_one(self):
        r = [occasional_moments(n, 0.5).ratio for n in (10, 1000, 100000)]
        assert r[0] > r[1] > r[2] > 1


class TestTrace:
    def test_trace_consistency(self):
        tr = simulate_occasional(200, 0.3, RandomStream(2))
        tr.check()
        assert tr.reversion_count(199) == len(tr.epochs)

    def test_tampered_trace(self):
        tr = simulate_occasional(30, 0.5, RandomStream(3))
        bad = OccasionalTrace(tr.values, tr.gates, tr.targets, tr.epochs, tr.intervals + 1)
        with pytest.raises(InvariantError):
            bad.check()


class TestBackwardChain:
    def test_transitions(self):
        (pi11, pi01), (pi11b, pi01b) = backward_transitions(3, HALF)
        assert (pi11, pi01) == (Fraction(3, 4), Fraction(1, 2))
        assert (pi11b, pi01b) == (1, 1)

    @pytest.mark.parametrize("n", range(1, 8))
    def test_pmf_is_clock_law(self, n):
        q = Fraction(2, 5)
        assert backward_chain_pmf(n, q).as_dict(exact=True) == occasional_pmf(n + 1, q).as_dict(exact=True)

    def test_marginals_match_pmf_mean(self):
        n, q = 30, 0.35
        assert backward_chain_marginals(n, q).sum() == pytest.approx(occasional_moments(n + 1, q).mean)
        assert backward_chain_marginals(n, q)[0] == pytest.approx(1.0)

    def test_sampler_fits(self):
        S = backward_chain_sample(15, 0.5, RandomStream(4), 40000)
        assert verify.chi_square(S, occasional_pmf(16, 0.5)).pvalue > 1e-3
        assert isinstance(backward_chain_sample(5, 0.5, RandomStream(4)), int)


class TestDobrushin:
    def test_spec_example(self):
        assert dobrushin_diagnostic(3, 0.5).alpha == pytest.approx(0.75)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(2, 3000), st.floats(0.01, 1.0))
    def test_alpha_at_least_q(self, n, q):
        d = dobrushin_diagnostic(n, q)
        assert d.alpha >= q - 1e-15
        assert d.variance_sum >= d.variance_lower_bound - 1e-12

    def test_condition_grows(self):
        c = [dobrushin_diagnostic(n, 0.5).condition for n in (100, 1000, 10000)]
        assert c[0] < c[1] < c[2]


class TestEpochMartingale:
    def test_correction_truncation(self):
        w, tail = correction_weights(0.5, 1e-12)
        assert tail / 2 < 1e-12
        value, err = reversion_correction(1, 0.5)
        # with N = 1 the correction is E Y / 2 = 1 / (2q)
        assert value == pytest.approx(1.0, abs=1e-11)
        assert err < 1e-12

    def test_correction_rejects(self):
        with pytest.raises(ConfigurationError):
            correction_weights(1.0, 1e-12)
        with pytest.raises(ConfigurationError):
            correction_weights(0.5, 0)

    def test_trace_identity(self):
        tr = occasional_martingale_trace(25, 0.4, RandomStream(5))
        assert tr.epochs[-1] == len(tr.values)
        np.testing.assert_array_equal(np.cumsum(tr.intervals), tr.epochs)
        assert tr.S[0] == tr.epochs[0] * (tr.epochs[0] - 1) // 2
        np.testing.assert_array_equal(np.cumsum(tr.values)[tr.epochs - 1], tr.S)
        assert tr.M[0] == pytest.approx(tr.S[0] / tr.epochs[0])

    def test_trace_rebuilds_a_clock(self):
        tr = occasional_martingale_trace(10, 0.5, RandomStream(6))
        T = tr.values
        assert T[0] == 0
        N = set(tr.epochs.tolist())
        for k in range(1, len(T)):
            if k not in N:  # no gate at step k: the clock ticks forward
                assert T[k] == T[k - 1] + 1

    def test_mean_increments_zero(self):
        M = occasional_martingale_paths(8, 0.5, RandomStream(7), 60000, threads=2)
        z = [verify.mean_zscore(d) for d in np.diff(M, axis=1).T]
        assert max(abs(x) for x in z) < 4

    def test_threads_do_not_change_paths(self):
        a = occasional_martingale_paths(5, 0.3, RandomStream(8), 70000, threads=1)
        b = occasional_martingale_paths(5, 0.3, RandomStream(8), 70000, threads=3)
        np.testing.assert_array_equal(a, b)
