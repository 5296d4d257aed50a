"""The reverting clock ``T_{n+1} = 1 + T_{U(n)}``, ``T_1 = 0``.

Three sampling routes are provided (direct recursion, the Bernoulli product
and backward reversion times) together with the exact pmf, exact moments,
unsigned Stirling numbers of the first kind and a CLT diagnostic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from . import _bernoulli
from .core import (
    UNIFORM,
    ClockTrajectory,
    ConfigurationError,
    Occasional,
    Pmf,
    RandomStream,
    ReversionLaw,
    SizeError,
    Uniform,
    reversion_probabilities,
    reversion_weights,
)

EXACT_MAX_N = 13
STIRLING_MAX_N = 64
EULER_GAMMA = 0.5772156649015329


@dataclass(frozen=True)
class ClockMoments:
    n: int
    mean: float | Fraction
    variance: float | Fraction

    @property
    def asymptotic_mean(self) -> float:
        """Leading form ``log n + gamma``."""
        return math.log(self.n) + EULER_GAMMA

    @property
    def asymptotic_variance(self) -> float:
        return math.log(self.n) + EULER_GAMMA - math.pi**2 / 6


# ---------------------------------------------------------------------------
# Simulation


def _reversion_sampler(law: ReversionLaw, n: int):
    """Vectorised ``draw(k, size) -> (indices, gates)`` for steps k = 1..n-1."""
    if isinstance(law, Uniform):
        return lambda g, k, size: (g.integers(1, k + 1, size), None)
    if isinstance(law, Occasional):
        q = float(law.q)

        def draw(g, k, size):
            gate = g.random(size) < q
            u = g.integers(1, k + 1, size)
            return np.where(gate, u, k), gate

        return draw
    cum = np.cumsum(reversion_weights(law, max(n - 1, 1)))

    def draw(g, k, size):
        u = g.random(size) * cum[k - 1]
        idx = np.searchsorted(cum[:k], u, side="right") + 1
        return np.minimum(idx, k), None

    return draw


def clock_paths(n: int, rng: RandomStream, size: int, law: ReversionLaw = UNIFORM):
    """Simulate ``size`` independent clock paths.

    Returns ``(T, V, gates)`` with ``T`` of shape (size, n) holding
    ``T_1..T_n``, ``V`` of shape (size, n-1) holding the 1-based reversion
    indices, and ``gates`` the occasional-law draws (or None).
    """
    if n < 1:
        raise ConfigurationError("n must be >= 1")
    g = rng.generator
    draw = _reversion_sampler(law, n)
    T = np.zeros((size, n), dtype=np.int32)
    V = np.zeros((size, n - 1), dtype=np.int32)
    gates = np.zeros((size, n - 1), dtype=bool) if isinstance(law, Occasional) else None
    rows = np.arange(size)
    for k in range(1, n):
        u, gate = draw(g, k, size)
        V[:, k - 1] = u
        if gates is not None:
            gates[:, k - 1] = gate
        T[:, k] = 1 + T[rows, u - 1]
    return T, V, gates


def simulate_clock_recursive(n: int, rng: RandomStream, law: ReversionLaw = UNIFORM) -> ClockTrajectory:
    """One trajectory ``T_1..T_n`` with its stored reversion indices."""
    T, V, gates = clock_paths(n, rng, 1, law)
    return ClockTrajectory(T[0], V[0], law, None if gates is None else gates[0])


def simulate_clock_bernoulli(n: int, rng: RandomStream, size=None, law: ReversionLaw = UNIFORM):
    """``T_n`` as ``Z_1 + ... + Z_{n-1}`` with independent ``Z_k ~ Bernoulli(p_k)``."""
    if n < 1:
        raise ConfigurationError("n must be >= 1")
    if n == 1:
        return 0 if size is None else np.zeros(size, dtype=np.int64)
    p = reversion_probabilities(law, n - 1)
    shape = (n - 1,) if size is None else (size, n - 1)
    z = rng.generator.random(shape) < p
    out = z.sum(axis=-1)
    return int(out) if size is None else out


def reversion_times_from_draws(z) -> tuple:
    """``W_j = max{m : Z_m + ... + Z_n = j}`` for the given Bernoulli draws.

    ``z[0]`` is ``Z_1``. The result lists the success indices from the right.
    """
    z = [int(v) for v in z]
    return tuple(m for m in range(len(z), 0, -1) if z[m - 1])


def backward_reversion_times(n: int, rng: RandomStream) -> tuple:
    """Decreasing reversion times ``W_1 > W_2 > ... > W_tau = 1`` for ``T_{n+1}``.

    ``tau`` has the law of ``T_{n+1}``; ``W_1`` is uniform on ``{1..n}``.
    """
    if n < 1:
        raise ConfigurationError("n must be >= 1")
    p = 1.0 / np.arange(1, n + 1)
    z = rng.generator.random(n) < p
    z[0] = True
    return reversion_times_from_draws(z)


# ---------------------------------------------------------------------------
# Exact distribution


def _harmonic_sums(n: int, exact: bool):
    if exact:
        m = sum((Fraction(1, k) for k in range(1, n)), Fraction(0))
        v = sum((Fraction(k - 1, k * k) for k in range(1, n)), Fraction(0))
        return m, v
    k = np.arange(1, n, dtype=float)
    return math.fsum(1.0 / k), math.fsum(1.0 / k - 1.0 / (k * k))


def clock_moments(n: int, exact: bool = False) -> ClockMoments:
    """Exact partial sums ``m_n = H_{n-1}`` and ``v_n = sum_{k<n} (1/k - 1/k^2)``."""
    if n < 1:
        raise ConfigurationError("n must be >= 1")
    m, v = _harmonic_sums(n, exact)
    return ClockMoments(n, m, v)


def _resolve_mode(n: int, tail_tolerance: float | None) -> bool:
    if tail_tolerance is None:
        return n <= EXACT_MAX_N
    if tail_tolerance < 0:
        raise ConfigurationError("tail_tolerance must be >= 0")
    if tail_tolerance == 0:
        if n > EXACT_MAX_N:
            raise SizeError(f"exact mode supports n <= {EXACT_MAX_N}, got {n}")
        return True
    return False


def bernoulli_product_pmf(law: ReversionLaw, n: int, tail_tolerance: float | None = None) -> Pmf:
    """Pmf of ``T_n`` for any Bernoulli-product law (uniform or weighted).

    ``tail_tolerance=None`` picks exact mode for n <= 13 and floating point
    above; ``0`` forces exact mode.
    """
    if n < 1:
        raise ConfigurationError("n must be >= 1")
    exact = _resolve_mode(n, tail_tolerance)
    if n == 1:
        return Pmf.from_exact({0: Fraction(1)})
    probs = reversion_probabilities(law, n - 1, exact=exact)
    if exact:
        return _bernoulli.exact_pmf(probs)
    return _bernoulli.float_pmf(probs, tail_tolerance or 0.0)


def clock_pmf(n: int, tail_tolerance: float | None = None) -> Pmf:
    """Pmf of ``T_n``: coefficients of ``s(1+s)...(n-2+s)/(n-1)!``."""
    return bernoulli_product_pmf(UNIFORM, n, tail_tolerance)


@lru_cache(maxsize=None)
def _stirling_rows(n: int) -> tuple:
    if n == 0:
        return (1,)
    prev = _stirling_rows(n - 1)
    row = [0] * (n + 1)
    for k in range(1, n + 1):
        row[k] = (prev[k - 1] if k - 1 < len(prev) else 0) + (n - 1) * (prev[k] if k < len(prev) else 0)
    return tuple(row)


def stirling_first(n: int, k: int) -> int:
    """Unsigned Stirling number of the first kind ``[n, k]``."""
    if not (0 <= k <= n <= STIRLING_MAX_N):
        raise SizeError(f"need 0 <= k <= n <= {STIRLING_MAX_N}, got n={n}, k={k}")
    return _stirling_rows(n)[k]


# ---------------------------------------------------------------------------
# Diagnostics


@dataclass(frozen=True)
class CLTDiagnostic:
    n: int
    ks: float
    mean: float
    variance: float
    max_atom: float
    dropped_mass: float
    convention: str = "right-endpoint CDF comparison, no continuity correction"


def clock_clt_diagnostic(n: int, tail_tolerance: float | None = None) -> CLTDiagnostic:
    """KS distance between the standardised exact pmf of ``T_n`` and Phi."""
    from .verify import ks_statistic

    if n < 3:
        raise ConfigurationError("n >= 3 required: T_2 is degenerate")
    pmf = clock_pmf(n, tail_tolerance)
    mom = clock_moments(n)
    ks = ks_statistic(pmf, loc=float(mom.mean), scale=math.sqrt(float(mom.variance)))
    return CLTDiagnostic(n, ks, float(mom.mean), float(mom.variance), max(pmf.probs), pmf.dropped_mass)


def clock_rho(n: int, exact: bool = False):
    """Lyapunov sum ``rho_n = sum_{k<n} E|Z_k - 1/k|^3``."""
    if n < 2:
        return Fraction(0) if exact else 0.0
    terms = _bernoulli.lyapunov_terms(reversion_probabilities(UNIFORM, n - 1, exact), exact)
    return sum(terms, Fraction(0)) if exact else math.fsum(terms)
