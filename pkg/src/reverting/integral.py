"""Time integral ``S_n = T_1 + ... + T_n`` and the martingale ``M_n = (S_n - E S_n)/n``."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .core import ClockTrajectory, ConfigurationError, InvariantError, Uniform

VARIANCE_LIMIT = 2 - math.pi**2 / 6
INCREMENT_BOUND = 1.5


@dataclass(frozen=True)
class MartingaleTrace:
    n: int
    S: int
    M: float | Fraction
    expected_S: float | Fraction


@dataclass(frozen=True)
class MartingaleVariance:
    n: int
    variance: float | Fraction
    q_sum: float | Fraction
    limit: float = VARIANCE_LIMIT


def expected_integral(n: int, exact: bool = False):
    """``E S_n = n (1/2 + ... + 1/n)``."""
    if exact:
        return n * sum((Fraction(1, k) for k in range(2, n + 1)), Fraction(0))
    return n * math.fsum(1.0 / k for k in range(2, n + 1))


def integrated_trace(trajectory: ClockTrajectory, exact: bool = False) -> list:
    """Running ``(S_k, M_k)`` for k = 1..n along a uniform clock trajectory."""
    if not isinstance(trajectory.law, Uniform):
        raise ConfigurationError("integrated_trace needs a uniform reversion trajectory")
    out = []
    S = 0
    H = Fraction(0) if exact else 0.0
    for k, t in enumerate(np.asarray(trajectory.values).tolist(), start=1):
        S += t
        if k >= 2:
            H += Fraction(1, k) if exact else 1.0 / k
        ES = k * H
        out.append(MartingaleTrace(k, S, (S - ES) / k, ES))
    return out


def martingale_paths(T: np.ndarray) -> np.ndarray:
    """``M_1..M_n`` for each row of a (size, n) array of clock paths."""
    T = np.atleast_2d(np.asarray(T, dtype=float))
    n = T.shape[1]
    k = np.arange(1, n + 1, dtype=float)
    h = np.concatenate([[0.0], np.cumsum(1.0 / k[1:])])
    return (np.cumsum(T, axis=1) - k * h) / k


def hoeffding_check(trace) -> float:
    """Largest martingale increment; raises if any exceeds 3/2.

    Accepts a list of :class:`MartingaleTrace` or an array of ``M`` paths.
    """
    if isinstance(trace, (list, tuple)) and trace and isinstance(trace[0], MartingaleTrace):
        M = np.array([float(t.M) for t in trace])[None, :]
    else:
        M = np.atleast_2d(np.asarray(trace, dtype=float))
    if M.shape[1] < 2:
        return 0.0
    worst = float(np.max(np.abs(np.diff(M, axis=1))))
    if worst > INCREMENT_BOUND:
        raise InvariantError(f"martingale increment {worst} exceeds {INCREMENT_BOUND}")
    return worst


def _clock_variances(n: int, exact: bool):
    if exact:
        v, out = Fraction(0), []
        for k in range(1, n + 1):
            out.append(v)
            v += Fraction(k - 1, k * k)
        return out
    k = np.arange(1, n, dtype=float)
    return np.concatenate([[0.0], np.cumsum(1.0 / k - 1.0 / (k * k))])


def martingale_variance(n: int, exact: bool = False) -> MartingaleVariance:
    """Exact ``Var M_n = ((n+1)/n) Q_n`` with ``Q_n = sum_{k<=n} v_k / (k(k+1))``."""
    if n < 1:
        raise ConfigurationError("n must be >= 1")
    v = _clock_variances(n, exact)
    if exact:
        Q = sum((v[k - 1] / (k * (k + 1)) for k in range(1, n + 1)), Fraction(0))
        return MartingaleVariance(n, Fraction(n + 1, n) * Q, Q)
    k = np.arange(1, n + 1, dtype=float)
    Q = math.fsum(v / (k * (k + 1)))
    return MartingaleVariance(n, (n + 1) / n * Q, Q)


def integral_variance(n: int, exact: bool = False):
    """``Var S_n = n (n+1) Q_n``."""
    mv = martingale_variance(n, exact)
    return n * (n + 1) * mv.q_sum


def clock_covariance(n: int, m: int, exact: bool = False):
    """``Cov(T_n, T_{n+m}) = ((n-1)/n) Var M_{n-1} + Var T_n / n``; free of ``m``."""
    if n < 2 or m < 1:
        raise ConfigurationError("need n >= 2 and m >= 1")
    var_m = martingale_variance(n - 1, exact).variance
    v_n = _clock_variances(n, exact)[n - 1]
    if exact:
        return Fraction(n - 1, n) * var_m + v_n / n
    return (n - 1) / n * var_m + float(v_n) / n


def azuma_tail_bound(n: int, x: float) -> float:
    """Azuma-Hoeffding bound on ``P(|M_n| >= x)`` with increments bounded by 3/2."""
    if n < 1 or x <= 0:
        raise ConfigurationError("need n >= 1 and x > 0")
    if n == 1:
        return 0.0
    return min(1.0, 2.0 * math.exp(-x * x / (2 * (n - 1) * INCREMENT_BOUND**2)))
