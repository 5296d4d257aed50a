"""Reverting random walks ``R_{n+1} = R_{U(n)} + X_n``, ``R_1 = 0``.

The walk is an ordinary random walk read at the random time ``T_n`` of the
coupled clock. Simulation routes: the coupled recursion, subordination, and
(for +/-1 steps) the inhomogeneous three-point walk.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from math import comb, factorial

import numpy as np

from .clock import EXACT_MAX_N, _reversion_sampler, clock_moments, clock_pmf, simulate_clock_bernoulli, stirling_first
from .core import (
    UNIFORM,
    ClockTrajectory,
    ConfigurationError,
    InvariantError,
    Pmf,
    RandomStream,
    ReversionLaw,
    SizeError,
    StepLaw,
    Uniform,
    as_exact,
)


@dataclass(frozen=True, eq=False)
class WalkTrajectory:
    """``R_1..R_n`` with the coupled clock and the steps ``X_1..X_{n-1}``."""

    values: np.ndarray
    clock: ClockTrajectory
    steps: np.ndarray

    @property
    def n(self) -> int:
        return len(self.values)

    def history_indices(self) -> list:
        """Step indices composing each ``R_k``, built inductively from the reversions.

        ``R_{k+1}`` reuses the indices of ``R_{U(k)}`` and appends ``k``.
        """
        hist = [()]
        for k, u in enumerate(self.clock.reversions.tolist(), start=1):
            hist.append(hist[u - 1] + (k,))
        return hist

    def check(self) -> None:
        self.clock.check()
        R, X, T = self.values, self.steps, self.clock.values
        if R[0] != 0:
            raise InvariantError("R_1 must be 0")
        U = self.clock.reversions
        if np.any(R[1:] != R[U - 1] + X):
            raise InvariantError("R_{k+1} != R_{U(k)} + X_k")
        for k, idx in enumerate(self.history_indices()):
            if len(idx) != T[k]:
                raise InvariantError(f"T_{k + 1} differs from the number of composing steps")
            if any(b <= a for a, b in zip(idx, idx[1:])):
                raise InvariantError("composing steps must form a subsequence")
            total = sum(X[i - 1] for i in idx) if idx else 0
            if total != R[k]:
                raise InvariantError(f"R_{k + 1} is not the sum of its composing steps")


def _walk_paths(n, step_law, reversion_law, rng, size):
    g = rng.generator
    draw = _reversion_sampler(reversion_law, n)
    X = np.asarray(step_law.sample(rng, (size, n - 1))) if n > 1 else np.zeros((size, 0))
    dtype = np.int64 if np.issubdtype(X.dtype, np.integer) else float
    R = np.zeros((size, n), dtype=dtype)
    T = np.zeros((size, n), dtype=np.int32)
    V = np.zeros((size, n - 1), dtype=np.int32)
    rows = np.arange(size)
    for k in range(1, n):
        u, _ = draw(g, k, size)
        V[:, k - 1] = u
        T[:, k] = 1 + T[rows, u - 1]
        R[:, k] = R[rows, u - 1] + X[:, k - 1]
    return R, T, V, X


def simulate_walk_recursive(n: int, step_law: StepLaw, reversion_law: ReversionLaw, rng: RandomStream) -> WalkTrajectory:
    """One coupled trajectory; clock and walk share the same reversions."""
    if n < 1:
        raise ConfigurationError("n must be >= 1")
    R, T, V, X = _walk_paths(n, step_law, reversion_law, rng, 1)
    return WalkTrajectory(R[0], ClockTrajectory(T[0], V[0], reversion_law), X[0])


def sample_walk_recursive(n: int, step_law: StepLaw, reversion_law: ReversionLaw, rng: RandomStream, size: int):
    """``(T_n, R_n)`` arrays from ``size`` coupled recursions."""
    if n < 1:
        raise ConfigurationError("n must be >= 1")
    R, T, _, _ = _walk_paths(n, step_law, reversion_law, rng, size)
    return T[:, -1], R[:, -1]


def _random_walk_at(times: np.ndarray, step_law: StepLaw, rng: RandomStream):
    times = np.asarray(times)
    top = int(times.max()) if times.size else 0
    if top == 0:
        return np.zeros(times.shape, dtype=np.int64)
    X = np.asarray(step_law.sample(rng, times.shape + (top,)))
    mask = np.arange(top) < times[..., None]
    return np.where(mask, X, 0).sum(axis=-1)


def simulate_walk_subordinated(n: int, step_law: StepLaw, rng: RandomStream, size=None):
    """``R_n = X*_1 + ... + X*_{T_n}`` with fresh steps and ``T_n`` from the Bernoulli route."""
    T = simulate_clock_bernoulli(n, rng, 1 if size is None else size)
    R = _random_walk_at(np.asarray(T), step_law, rng)
    return R[0].item() if size is None else R


def simulate_walk_inhomogeneous(n: int, p, rng: RandomStream, size=None):
    """Simple walk as ``n-1`` independent steps +1, 0, -1 with probabilities ``p/k, (k-1)/k, q/k``."""
    if n < 1:
        raise ConfigurationError("n must be >= 1")
    m = 1 if size is None else size
    if n == 1:
        out = np.zeros(m, dtype=np.int64)
    else:
        k = np.arange(1, n, dtype=float)
        u = rng.generator.random((m, n - 1))
        up = u < float(p) / k
        down = (u >= float(p) / k) & (u < 1.0 / k)
        out = up.sum(axis=1) - down.sum(axis=1)
    return int(out[0]) if size is None else out


# ---------------------------------------------------------------------------
# Exact distribution


def walk_pmf_simple(n: int, p) -> Pmf:
    """Exact pmf of ``R_n`` for +/-1 steps via Stirling numbers.

    ``E s^{R_n} = (1/(n-1)!) sum_k [n-1, k] (p s + q/s)^k``.
    """
    if not (1 <= n <= EXACT_MAX_N):
        raise SizeError(f"exact walk pmf supports 1 <= n <= {EXACT_MAX_N}, got {n}")
    p = as_exact(p)
    if not (0 <= p <= 1):
        raise ConfigurationError("p must lie in [0, 1]")
    q = 1 - p
    m = n - 1
    out: dict[int, Fraction] = {}
    norm = Fraction(1, factorial(m))
    for k in range(0, m + 1):
        s = stirling_first(m, k)
        if s == 0:
            continue
        for j in range(k + 1):
            x = 2 * j - k
            out[x] = out.get(x, Fraction(0)) + norm * s * comb(k, j) * p**j * q ** (k - j)
    return Pmf.from_exact(out)


def _convolve_exact(a: dict, b: dict) -> dict:
    out: dict = {}
    for x, px in a.items():
        for y, py in b.items():
            out[x + y] = out.get(x + y, Fraction(0)) + px * py
    return out


def walk_pmf(n: int, step_law: StepLaw, tail_tolerance: float | None = None) -> Pmf:
    """Pmf of ``R_n`` by mixing the clock pmf with t-fold step convolutions.

    Requires an integer-lattice step law. Exact when the clock pmf is exact.
    """
    values, probs = step_law.lattice()
    clock = clock_pmf(n, tail_tolerance)
    if clock.is_exact:
        step = {v: as_exact(p) for v, p in zip(values, probs)}
        out: dict = {}
        conv = {0: Fraction(1)}
        t = 0
        for tt, w in zip(clock.values, clock.exact):
            while t < tt:
                conv = _convolve_exact(conv, step)
                t += 1
            for x, px in conv.items():
                out[x] = out.get(x, Fraction(0)) + w * px
        return Pmf.from_exact(out)
    lo, hi = min(values), max(values)
    kernel = np.zeros(hi - lo + 1)
    for v, p in zip(values, probs):
        kernel[v - lo] = float(p)
    top = max(clock.values)
    # after t convolutions index 0 holds the value t * lo
    base = min(0, top * lo)
    acc = np.zeros(max(0, top * hi) - base + 1)
    conv = np.ones(1)
    t = 0
    for tt, w in zip(clock.values, clock.probs):
        while t < tt:
            conv = np.convolve(conv, kernel)
            t += 1
        shift = t * lo - base
        acc[shift : shift + len(conv)] += w * conv
    support = np.arange(len(acc)) + base
    return Pmf.from_floats(support, acc, dropped_mass=clock.dropped_mass)


def walk_char_function(n: int, theta, step_cf) -> complex:
    """Characteristic function of ``R_n``: ``prod_{k<n} ((k-1)/k + phi_X(theta)/k)``.

    ``step_cf`` is a callable or a step law with a ``cf`` method.
    """
    if n < 1:
        raise ConfigurationError("n must be >= 1")
    cf = step_cf.cf if hasattr(step_cf, "cf") else step_cf
    phi = np.asarray(cf(theta), dtype=complex)
    out = np.ones_like(phi)
    for k in range(1, n):
        out = out * ((k - 1) / k + phi / k)
    return complex(out) if out.ndim == 0 else out


def walk_moments(n: int, step_law: StepLaw, reversion_law: ReversionLaw = UNIFORM):
    """(mean, variance) of ``R_n``: ``m_n E X`` and ``m_n Var X + v_n (E X)^2``.

    Exact when the step moments are rational.
    """
    if not isinstance(reversion_law, Uniform):
        raise ConfigurationError("walk_moments supports uniform reversion only")
    mu, var = step_law.moments()
    exact = isinstance(mu, (int, Fraction)) and isinstance(var, (int, Fraction))
    cm = clock_moments(n, exact=exact)
    if not exact:
        mu, var = float(mu), float(var)
    return cm.mean * mu, cm.mean * var + cm.variance * mu * mu


def walk_clt_diagnostic(n: int, p=0.5, tail_tolerance: float | None = None) -> float:
    """KS distance of the standardised exact pmf of the simple walk ``R_n`` to Phi."""
    from .core import Rademacher
    from .verify import ks_statistic

    law = Rademacher(p)
    pmf = walk_pmf(n, law, tail_tolerance)
    mean, var = walk_moments(n, law)
    return ks_statistic(pmf, loc=float(mean), scale=math.sqrt(float(var)))
