"""Weighted reversions ``P(U(n) = k) = alpha_k / (alpha_1 + ... + alpha_n)``.

``T_{n+1}`` is a sum of independent Bernoulli(p_k) with
``p_k = alpha_k / (alpha_1 + ... + alpha_k)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import _bernoulli
from .clock import bernoulli_product_pmf
from .core import (
    ClockTrajectory,
    ConfigurationError,
    Explicit,
    Occasional,
    Pmf,
    ReversionLaw,
    reversion_probabilities,
    reversion_weights,
)


@dataclass(frozen=True)
class LyapunovDiagnostic:
    n: int
    rho: float
    variance: float
    ratio: float


def _as_law(weights) -> ReversionLaw:
    if isinstance(weights, Occasional):
        raise ConfigurationError("occasional reversion is not a weighted law")
    if hasattr(weights, "__dataclass_fields__"):
        return weights
    return Explicit(tuple(weights))


def _prefix(law: ReversionLaw, n: int, exact: bool = False):
    """Arrays (p_k, m_k, v_k) for k = 1..n, with m_k, v_k the moments of T_k."""
    p = reversion_probabilities(law, n, exact)
    if exact:
        m, v = [Fraction(0)], [Fraction(0)]
        for pk in p[: n - 1]:
            m.append(m[-1] + pk)
            v.append(v[-1] + pk * (1 - pk))
        return p, m, v
    m = np.concatenate([[0.0], np.cumsum(p[: n - 1])])
    v = np.concatenate([[0.0], np.cumsum(p[: n - 1] * (1 - p[: n - 1]))])
    return p, m, v


def weighted_clock_pmf(weights, n: int, tail_tolerance: float | None = None) -> Pmf:
    """Pmf of ``T_n`` under weighted reversions (exact for n <= 13 with rational weights)."""
    return bernoulli_product_pmf(_as_law(weights), n, tail_tolerance)


def weighted_clock_moments(weights, n: int, exact: bool = False):
    """``(m_n, v_n) = (sum_{k<n} p_k, sum_{k<n} p_k q_k)``."""
    if n < 1:
        raise ConfigurationError("n must be >= 1")
    if n == 1:
        return (Fraction(0), Fraction(0)) if exact else (0.0, 0.0)
    return _bernoulli.moments(reversion_probabilities(_as_law(weights), n - 1, exact), exact)


def weighted_moment_ladder(weights, ns) -> list:
    """``(n, m_n, v_n)`` for each n in ``ns`` from a single pass."""
    law = _as_law(weights)
    top = max(ns)
    p = reversion_probabilities(law, max(top - 1, 1))
    m = np.concatenate([[0.0], np.cumsum(p)])
    v = np.concatenate([[0.0], np.cumsum(p * (1 - p))])
    return [(n, float(m[n - 1]), float(v[n - 1])) for n in ns]


def lyapunov_diagnostic(weights, n: int) -> LyapunovDiagnostic:
    """``rho_n = sum_{k<n} p_k q_k (p_k^2 + q_k^2)`` against ``v_n^{3/2}``."""
    return lyapunov_ladder(weights, [n])[0]


def lyapunov_ladder(weights, ns) -> list:
    law = _as_law(weights)
    top = max(ns)
    if top < 2:
        raise ConfigurationError("v_n = 0 for n < 2")
    p = reversion_probabilities(law, top - 1)
    rho = np.concatenate([[0.0], np.cumsum(_bernoulli.lyapunov_terms(p))])
    var = np.concatenate([[0.0], np.cumsum(p * (1 - p))])
    out = []
    for n in ns:
        r, v = float(rho[n - 1]), float(var[n - 1])
        if v <= 0:
            raise ConfigurationError(f"degenerate variance at n={n}")
        out.append(LyapunovDiagnostic(n, r, v, r / v**1.5))
    return out


def weighted_martingale_trace(trajectory: ClockTrajectory, weights, exact: bool = False) -> list:
    """Running ``M_n = sum_{k<=n} alpha_k (T_k - m_k) / sum_{k<=n} alpha_k``."""
    law = _as_law(weights)
    if trajectory.law != law:
        raise ConfigurationError("trajectory was not generated under these weights")
    n = trajectory.n
    alpha = reversion_weights(law, n, exact)
    _, m, _ = _prefix(law, n, exact)
    T = np.asarray(trajectory.values).tolist()
    num = Fraction(0) if exact else 0.0
    den = Fraction(0) if exact else 0.0
    out = []
    for k in range(n):
        a = alpha[k] if exact else float(alpha[k])
        num += a * (T[k] - m[k])
        den += a
        out.append(num / den)
    return out


def weighted_martingale_variance(weights, n: int, exact: bool = False):
    """``Var M_n = p_n^2 v_n + (1 - p_n^2) Var M_{n-1}`` from ``Var M_1 = 0``."""
    if n < 1:
        raise ConfigurationError("n must be >= 1")
    p, _, v = _prefix(_as_law(weights), n, exact)
    var = Fraction(0) if exact else 0.0
    for k in range(1, n):
        pk2 = p[k] * p[k]
        var = pk2 * v[k] + (1 - pk2) * var
    return var if exact else float(var)


def weighted_martingale_variance_series(weights, n: int, exact: bool = False):
    """Same quantity via ``Q_n = sum_{k=2}^n p_k^2 J_k v_k`` and ``Var M_n = Q_n / J_n``."""
    p, _, v = _prefix(_as_law(weights), n, exact)
    J = Fraction(1) if exact else 1.0
    Q = Fraction(0) if exact else 0.0
    for k in range(1, n):
        J = J / (1 - p[k] * p[k])
        Q += p[k] * p[k] * J * v[k]
    return Q / J if exact else float(Q / J)


def martingale_condition_series(weights, n: int) -> float:
    """Partial sum ``sum_{k<=n} p_k^2 v_k``; bounded iff the weighted martingale is L2-bounded."""
    p, _, v = _prefix(_as_law(weights), n)
    return math.fsum(p * p * v)
