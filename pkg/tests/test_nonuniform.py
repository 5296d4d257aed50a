from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reverting import verify
from reverting.clock import clock_moments, clock_pmf, simulate_clock_recursive
from reverting.core import UNIFORM, ConfigurationError, Explicit, Occasional, PowerLaw, RandomStream
from reverting.integral import martingale_variance
from reverting.nonuniform import (
    lyapunov_diagnostic,
    lyapunov_ladder,
    martingale_condition_series,
    weighted_clock_moments,
    weighted_clock_pmf,
    weighted_martingale_trace,
    weighted_martingale_variance,
    weighted_martingale_variance_series,
    weighted_moment_ladder,
)

weights_strategy = st.lists(st.integers(1, 20), min_size=2, max_size=9)


class TestPmf:
    def test_spec_example(self):
        w = (1, 2, 3)
        assert weighted_clock_pmf(w, 4).as_dict(exact=True) == {1: Fraction(1, 6), 2: Fraction(1, 2), 3: Fraction(1, 3)}
        assert weighted_clock_moments(w, 4, exact=True) == (Fraction(13, 6), Fraction(17, 36))
        assert weighted_martingale_variance(w, 3, exact=True) == Fraction(1, 18)

    def test_constant_weights_are_uniform(self):
        for n in range(1, 10):
            assert weighted_clock_pmf(Explicit((5,) * 9), n).as_dict(exact=True) == clock_pmf(n).as_dict(exact=True)
        assert weighted_clock_pmf(PowerLaw(0), 30).probs == pytest.approx(clock_pmf(30).probs)

    @settings(max_examples=25, deadline=None)
    @given(weights_strategy)
    def test_matches_enumeration(self, weights):
        n = len(weights)
        law = Explicit(tuple(weights))
        assert weighted_clock_pmf(law, n).as_dict(exact=True) == verify.enumerate_clock(n, law).as_dict(exact=True)

    def test_accepts_sequences_and_rejects_occasional(self):
        assert weighted_clock_pmf([1, 1, 1], 3).as_dict(exact=True) == {1: Fraction(1, 2), 2: Fraction(1, 2)}
        with pytest.raises(ConfigurationError):
            weighted_clock_pmf(Occasional(0.5), 3)

    def test_moment_ladder(self):
        rows = weighted_moment_ladder(PowerLaw(1), [5, 50])
        m, v = weighted_clock_moments(PowerLaw(1), 50)
        assert rows[1] == (50, pytest.approx(m), pytest.approx(v))


class TestRegimes:
    def test_beta_minus_two_variance_converges(self):
        (_, _, v4), (_, _, v6) = weighted_moment_ladder(PowerLaw(-2), [10**4, 10**6])
        assert abs(v6 - v4) < 1e-3

    @pytest.mark.parametrize("beta", [0, 1, 3])
    def test_lyapunov_ratio_decreases(self, beta):
        r = [d.ratio for d in lyapunov_ladder(PowerLaw(beta), [10**2, 10**3, 10**4, 10**5])]
        assert all(b < a for a, b in zip(r, r[1:]))

    def test_lyapunov_uniform_matches_clock(self):
        d = lyapunov_diagnostic(UNIFORM, 1000)
        assert d.variance == pytest.approx(clock_moments(1000).variance)
        with pytest.raises(ConfigurationError):
            lyapunov_diagnostic(UNIFORM, 1)


class TestMartingale:
    @settings(max_examples=25, deadline=None)
    @given(weights_strategy)
    def test_variance_routes_agree(self, weights):
        law = Explicit(tuple(weights))
        for n in range(1, len(weights) + 1):
            assert weighted_martingale_variance(law, n, exact=True) == weighted_martingale_variance_series(law, n, exact=True)

    def test_uniform_reduces_to_integral(self):
        for n in range(1, 15):
            assert weighted_martingale_variance(Explicit((1,) * 15), n, exact=True) == martingale_variance(n, exact=True).variance

    def test_condition_series(self):
        # bounded for polynomial weights, diverging for geometric ones (p_k -> 1/2)
        assert martingale_condition_series(UNIFORM, 10**5) < 2
        assert martingale_condition_series(PowerLaw(2), 10**5) - martingale_condition_series(PowerLaw(2), 10**4) < 0.03
        geometric = Explicit(tuple(2.0**k for k in range(400)))
        assert martingale_condition_series(geometric, 400) > 3 * martingale_condition_series(geometric, 100)

    def test_trace_matches_simulated_variance(self):
        law = PowerLaw(1)
        n, size = 25, 8000
        rng = RandomStream(7)
        finals = np.array([weighted_martingale_trace(simulate_clock_recursive(n, rng.spawn(i), law), law)[-1] for i in range(size)])
        var = weighted_martingale_variance(law, n)
        assert abs(finals.mean()) < 4 * np.sqrt(var / size)
        assert finals.var() == pytest.approx(var, rel=0.08)

    def test_trace_law_mismatch(self):
        traj = simulate_clock_recursive(5, RandomStream(8))
        with pytest.raises(ConfigurationError):
            weighted_martingale_trace(traj, PowerLaw(1))

    def test_exact_trace(self):
        traj = simulate_clock_recursive(6, RandomStream(9), Explicit((1, 2, 3, 4, 5, 6)))
        out = weighted_martingale_trace(traj, Explicit((1, 2, 3, 4, 5, 6)), exact=True)
        assert out[0] == 0
        assert all(isinstance(x, Fraction) for x in out)
