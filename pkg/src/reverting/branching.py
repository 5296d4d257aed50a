"""Reverting Galton-Watson process ``X_{n+1} = sum_{k <= X_{U(n)}} Z_{k,n}``, ``X_1 = 1``.

The population evolves like an ordinary Galton-Watson process run on the
clock's time scale, so ``H_n(s) = E W^{(T_n)}(s)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .clock import clock_pmf
from .core import ConfigurationError, MASS_TOLERANCE, RandomStream, SizeError, sample_in_chunks

DEFAULT_POPULATION_CAP = 10**7


@dataclass(frozen=True)
class OffspringLaw:
    """Offspring distribution ``P(Z = k) = probs[k]``; p.g.f. ``W(s) = sum_k probs[k] s^k``."""

    probs: tuple

    def __post_init__(self):
        probs = tuple(self.probs)
        if not probs:
            raise ConfigurationError("offspring law needs at least one probability")
        if any(p < 0 for p in probs):
            raise ConfigurationError("offspring probabilities must be non-negative")
        total = sum(probs)
        if all(isinstance(p, (int, Fraction)) for p in probs):
            if total != 1:
                raise ConfigurationError(f"offspring probabilities sum to {total}, not 1")
        elif abs(float(total) - 1) > MASS_TOLERANCE:
            raise ConfigurationError(f"offspring probabilities sum to {float(total)!r}, not 1")
        object.__setattr__(self, "probs", probs)

    @classmethod
    def from_mapping(cls, mapping) -> "OffspringLaw":
        top = max(mapping)
        if min(mapping) < 0:
            raise ConfigurationError("offspring counts must be non-negative")
        return cls(tuple(mapping.get(k, 0) for k in range(top + 1)))

    @property
    def exact(self) -> bool:
        return all(isinstance(p, (int, Fraction)) for p in self.probs)

    def __call__(self, s):
        """Evaluate ``W(s)`` by Horner's rule (exact for rational input)."""
        out = 0
        for c in reversed(self.probs):
            out = out * s + c
        return out

    @property
    def mean(self):
        return sum(k * p for k, p in enumerate(self.probs))

    @property
    def variance(self):
        m2 = sum(k * k * p for k, p in enumerate(self.probs))
        return m2 - self.mean**2


@dataclass(frozen=True, eq=False)
class BranchingRun:
    populations: np.ndarray  # X_1..X_n (entries after a cap hit are -1)
    reversions: np.ndarray
    capped: bool


def _offspring_total(counts: np.ndarray, law: OffspringLaw, g: np.random.Generator) -> np.ndarray:
    pv = np.array([float(p) for p in law.probs])
    pv = pv / pv.sum()
    if len(pv) == 1:
        return np.zeros_like(counts)
    draws = g.multinomial(counts, pv)
    return draws @ np.arange(len(pv))


def simulate_reverting_gw(
    n: int, offspring: OffspringLaw, rng: RandomStream, population_cap: int = DEFAULT_POPULATION_CAP
) -> BranchingRun:
    """One run of ``X_1..X_n``; stops with ``capped=True`` once a population exceeds the cap."""
    if n < 1:
        raise ConfigurationError("n must be >= 1")
    g = rng.generator
    X = np.full(n, -1, dtype=np.int64)
    X[0] = 1
    U = np.zeros(n - 1, dtype=np.int64)
    for k in range(1, n):
        u = int(g.integers(1, k + 1))
        U[k - 1] = u
        X[k] = _offspring_total(np.array([X[u - 1]]), offspring, g)[0]
        if X[k] > population_cap:
            return BranchingRun(X, U[:k], True)
    return BranchingRun(X, U, False)


def sample_reverting_gw(
    n: int,
    offspring: OffspringLaw,
    rng: RandomStream,
    size: int,
    population_cap: int = DEFAULT_POPULATION_CAP,
    threads: int = 1,
):
    """Populations ``X_1..X_n`` for ``size`` runs, shape (size, n), and a capped mask.

    Capped runs hold -1 from the first over-cap generation onward.
    """

    def run(stream, m):
        g = stream.generator
        X = np.zeros((m, n), dtype=np.int64)
        X[:, 0] = 1
        alive = np.ones(m, dtype=bool)
        rows = np.arange(m)
        for k in range(1, n):
            u = g.integers(1, k + 1, m)
            parents = np.where(alive, X[rows, u - 1], 0)
            nxt = _offspring_total(parents, offspring, g)
            over = nxt > population_cap
            alive &= ~over
            X[:, k] = np.where(alive, nxt, -1)
        return np.column_stack([X, ~alive])

    out = sample_in_chunks(run, size, rng, threads)
    return out[:, :n], out[:, n].astype(bool)


def gw_iterate(offspring: OffspringLaw, t: int, s, degree_cap: int | None = None):
    """``W^{(t)}(s)`` with ``W^{(0)}(s) = s``.

    With ``degree_cap`` the truncated polynomial of ``W^{(t)}`` is also
    returned, as ``(value, coefficients, dropped_mass)``; evaluating the
    truncated polynomial on [0, 1] is off by at most ``dropped_mass``.
    """
    if t < 0:
        raise ConfigurationError("t must be >= 0")
    value = s
    for _ in range(t):
        value = offspring(value)
    if degree_cap is None:
        return value
    coef = [Fraction(0), Fraction(1)] if offspring.exact else [0.0, 1.0]
    dropped = 0
    for _ in range(t):
        coef, dropped = _compose(offspring.probs, coef, degree_cap)
    return value, coef, dropped


def _poly_mul(a, b, cap):
    out = [0] * min(len(a) + len(b) - 1, cap + 1)
    lost = 0
    for i, x in enumerate(a):
        if x == 0:
            continue
        for j, y in enumerate(b):
            if i + j <= cap:
                out[i + j] += x * y
            else:
                lost += x * y
    return out, lost


def _compose(outer, inner, cap):
    """Coefficients of ``outer(inner(s))`` up to degree ``cap`` and the dropped mass."""
    result = [0] * (cap + 1)
    result[0] = outer[0]
    power = [1]
    for c in outer[1:]:
        power, _ = _poly_mul(power, inner, cap)
        for i, x in enumerate(power):
            result[i] += c * x
    while len(result) > 1 and result[-1] == 0:
        result.pop()
    # every p.g.f. has total mass 1, so what is missing was truncated
    return result, 1 - sum(result)


def reverting_gw_pgf(n: int, offspring: OffspringLaw, s, tail_tolerance: float | None = None):
    """``H_n(s) = sum_t P(T_n = t) W^{(t)}(s)``."""
    pmf = clock_pmf(n, tail_tolerance)
    weights = pmf.exact if (pmf.is_exact and offspring.exact and isinstance(s, (int, Fraction))) else pmf.probs
    total = 0
    value = s
    t = 0
    for tt, w in zip(pmf.values, weights):
        while t < tt:
            value = offspring(value)
            t += 1
        total += w * value
    return total


def extinction_probability(n: int, offspring: OffspringLaw, tail_tolerance: float | None = None):
    """``P(X_n = 0) = H_n(0)``."""
    zero = Fraction(0) if offspring.exact else 0.0
    return reverting_gw_pgf(n, offspring, zero, tail_tolerance)


def verify_H_recursion(n: int, offspring: OffspringLaw, s_grid) -> float:
    """Max over the grid of ``|H_{n+1}(s) - (1/n) sum_{k<=n} H_k(W(s))|``."""
    if not (1 <= n <= 10):
        raise SizeError("verify_H_recursion supports 1 <= n <= 10")
    worst = 0.0
    for s in s_grid:
        lhs = reverting_gw_pgf(n + 1, offspring, s)
        ws = offspring(s)
        rhs = sum(reverting_gw_pgf(k, offspring, ws) for k in range(1, n + 1)) / n
        worst = max(worst, abs(float(lhs - rhs)))
    return worst


def reverting_gw_moments(n: int, offspring: OffspringLaw, tail_tolerance: float | None = None):
    """``(E X_n, Var X_n)`` by mixing Galton-Watson moments over ``T_n``.

    Given ``T_n = t``: mean ``mu^t`` and variance ``sigma^2 mu^{t-1} (mu^t - 1)/(mu - 1)``
    (``t sigma^2`` when ``mu = 1``).
    """
    pmf = clock_pmf(n, tail_tolerance)
    exact = pmf.is_exact and offspring.exact
    weights = pmf.exact if exact else pmf.probs
    mu, sigma2 = offspring.mean, offspring.variance
    if not exact:
        mu, sigma2 = float(mu), float(sigma2)
    first = second = 0
    for t, w in zip(pmf.values, weights):
        mean_t = mu**t
        if mu == 1:
            var_t = t * sigma2
        else:
            var_t = sigma2 * mu ** (t - 1) * (mu**t - 1) / (mu - 1) if t > 0 else 0
        first += w * mean_t
        second += w * (var_t + mean_t * mean_t)
    return first, second - first * first
