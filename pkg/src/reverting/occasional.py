"""Occasionally reverting clock ``T_{n+1} = 1 + T_{V(n)}``.

``V(n) = n`` unless an independent Bernoulli(q) gate ``I_n`` fires, in which
case ``V(n) = U(n)`` is uniform on ``{1..n}``. Inter-reversion intervals are
geometric with mean ``1/q``.

Epoch convention used by the martingale: ``N(j)`` is the step at which the
j-th gate fires, ``Y_1 = N(1)`` and ``Y_j = N(j) - N(j-1)``, so that
``Y_1 + ... + Y_j = N(j)``.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ._bernoulli import TAIL_SIGMAS
from .clock import EXACT_MAX_N, clock_paths
from .core import (
    MASS_TOLERANCE,
    ConfigurationError,
    InvariantError,
    Occasional,
    Pmf,
    RandomStream,
    SizeError,
    as_exact,
    sample_in_chunks,
)


def _check_q(q):
    if not (0 < q <= 1):
        raise ConfigurationError(f"q must lie in (0, 1], got {q!r}")


def _is_rational(q) -> bool:
    return isinstance(q, (int, Fraction))


@dataclass(frozen=True, eq=False)
class OccasionalTrace:
    values: np.ndarray  # T_1..T_n
    gates: np.ndarray  # I_1..I_{n-1}
    targets: np.ndarray  # V(1)..V(n-1)
    epochs: np.ndarray  # N(1), N(2), ...: steps where the gate fired
    intervals: np.ndarray  # Y_1, Y_2, ...

    def reversion_count(self, k: int) -> int:
        """Number of gate firings among steps ``1..k``."""
        return int(np.count_nonzero(self.gates[:k]))

    def check(self) -> None:
        T, I, V = self.values, self.gates, self.targets
        k = np.arange(1, len(T))
        if T[0] != 0:
            raise InvariantError("T_1 must be 0")
        if np.any((~I) & (V != k)):
            raise InvariantError("V(k) must equal k when the gate is closed")
        if np.any(V < 1) or np.any(V > k):
            raise InvariantError("V(k) outside {1..k}")
        if np.any(T[1:] != 1 + T[V - 1]):
            raise InvariantError("T_{k+1} != 1 + T_{V(k)}")
        if np.any(np.cumsum(self.intervals) != self.epochs):
            raise InvariantError("interval sums do not match reversion epochs")


def simulate_occasional(n: int, q, rng: RandomStream) -> OccasionalTrace:
    """One trajectory of the occasionally reverting clock with full bookkeeping."""
    _check_q(q)
    T, V, I = clock_paths(n, rng, 1, Occasional(q))
    T, V, I = T[0], V[0], I[0]
    epochs = np.flatnonzero(I) + 1
    intervals = np.diff(np.concatenate([[0], epochs]))
    return OccasionalTrace(T, I, V, epochs, intervals)


def sample_occasional(n: int, q, rng: RandomStream, size: int) -> np.ndarray:
    """``size`` independent draws of ``T_n``."""
    _check_q(q)
    return clock_paths(n, rng, size, Occasional(q))[0][:, -1]


# ---------------------------------------------------------------------------
# Exact distribution and generating functions


def occasional_pmf(n: int, q, tail_tolerance: float | None = None) -> Pmf:
    """Pmf of ``T_n`` from ``G_{k+1} = s p G_k + (s q / k) (G_1 + ... + G_k)``.

    Exact for n <= 13 (floats for q are taken at their binary value).
    """
    _check_q(q)
    if n < 1:
        raise ConfigurationError("n must be >= 1")
    if tail_tolerance is None:
        exact = n <= EXACT_MAX_N
    elif tail_tolerance == 0:
        if n > EXACT_MAX_N:
            raise SizeError(f"exact mode supports n <= {EXACT_MAX_N}, got {n}")
        exact = True
    else:
        exact = False
    if exact:
        return _occasional_pmf_exact(n, as_exact(q))
    return _occasional_pmf_float(n, float(q), tail_tolerance or 0.0)


def _occasional_pmf_exact(n: int, q: Fraction) -> Pmf:
    p = 1 - q
    G = [Fraction(1)]
    total = [Fraction(1)]
    for k in range(1, n):
        nxt = [Fraction(0)] * (len(G) + 1)
        for i, c in enumerate(G):
            nxt[i + 1] += p * c
        for i, c in enumerate(total):
            nxt[i + 1] += q / k * c
        G = nxt
        total = [a + b for a, b in zip(total + [Fraction(0)], G)]
    return Pmf.from_exact(dict(enumerate(G)))


def _occasional_pmf_float(n: int, q: float, tail_tolerance: float) -> Pmf:
    mom = occasional_moments(n, q)
    cap = min(n - 1, int(math.ceil(mom.mean + TAIL_SIGMAS * math.sqrt(max(mom.variance, 0.0)))) + 1)
    while True:
        G = _capped_recursion(n, q, cap)
        lost = 1.0 - math.fsum(G)
        if abs(lost) < MASS_TOLERANCE or cap >= n - 1:
            break
        cap = min(n - 1, 2 * cap)
    dropped = max(lost, 0.0)
    if tail_tolerance > 0:
        small = G < tail_tolerance
        dropped += math.fsum(G[small])
        G = np.where(small, 0.0, G)
    return Pmf.from_floats(np.arange(len(G)), G, dropped_mass=dropped)


def _capped_recursion(n: int, q: float, cap: int) -> np.ndarray:
    p = 1.0 - q
    G = np.zeros(cap + 1)
    G[0] = 1.0
    total = G.copy()
    for k in range(1, n):
        nxt = np.zeros(cap + 1)
        nxt[1:] = p * G[:-1] + (q / k) * total[:-1]
        G = nxt
        total += G
    return G


def occasional_bivariate_gf(s, z, q):
    """Closed form of ``sum_k z^{k-1} E s^{T_k}``.

    ``(1 - s p z)^{(s-1)/(1-sp)} (1 - z)^{-q s/(1-sp)}``; ``s`` may be complex
    with ``|s| <= 1``.
    """
    _check_q(q)
    q = float(q)
    p = 1.0 - q
    if isinstance(s, complex):
        if abs(s) > 1 + 1e-12:
            raise ConfigurationError("need |s| <= 1")
    elif not (0 <= s <= 1):
        raise ConfigurationError("s must lie in [0, 1]")
    if abs(z) >= 1:
        raise ConfigurationError("need |z| < 1")
    if s * p == 1:
        raise ConfigurationError("singular parameters: s p = 1")
    d = 1 - s * p
    if isinstance(s, complex) or isinstance(z, complex):
        return cmath.exp((s - 1) / d * cmath.log(1 - s * p * z) - q * s / d * cmath.log(1 - z))
    return (1 - s * p * z) ** ((s - 1) / d) * (1 - z) ** (-q * s / d)


def occasional_walk_cf(theta: float, z, q, step_cf=None) -> complex:
    """``sum_k z^{k-1} E e^{i theta R_k} = G(phi_X(theta), z)``; unit steps by default."""
    if step_cf is None:
        phi = cmath.exp(1j * theta)
    else:
        cf = step_cf.cf if hasattr(step_cf, "cf") else step_cf
        phi = complex(cf(theta))
    return occasional_bivariate_gf(phi, z, q)


def occasional_gf_series(s, z, q, tolerance: float = 1e-10) -> float:
    """Truncated ``sum_{k<=K} z^{k-1} G_k(s)`` from the pmfs, with tail below ``tolerance``.

    Each ``G_k(s) <= 1`` so the tail is at most ``z^K / (1 - z)``.
    """
    if not (0 <= z < 1):
        raise ConfigurationError("z must lie in [0, 1)")
    K = 1
    while z**K / (1 - z) >= tolerance:
        K += 1
    return math.fsum(z ** (k - 1) * occasional_pmf(k, q).pgf(s) for k in range(1, K + 1))


# ---------------------------------------------------------------------------
# Moments


@dataclass(frozen=True)
class OccasionalMoments:
    n: int
    mean: float | Fraction
    second_moment: float | Fraction
    variance: float | Fraction

    @property
    def ratio(self) -> float:
        """``w_n / m_n^2``, which tends to 1."""
        return float(self.second_moment) / float(self.mean) ** 2 if self.mean else math.nan


def _mean_closed(n: int, q, exact: bool):
    """``m_1..m_n`` with ``m_{k+1} = q^{-1} sum_{j<=k} (1 - p^j)/j``."""
    p = 1 - q
    if exact:
        out, acc, pj = [Fraction(0)], Fraction(0), Fraction(1)
        for j in range(1, n):
            pj *= p
            acc += (1 - pj) / j
            out.append(acc / q)
        return out
    j = np.arange(1, n, dtype=float)
    return np.concatenate([[0.0], np.cumsum((1 - p**j) / j) / q])


def occasional_moments(n: int, q, exact: bool | None = None) -> OccasionalMoments:
    """Mean by the closed sum, second moment by the forward recursion.

    ``w_{k+1} = 1 + 2p m_k + p w_k + (2q/k) sum_{j<=k} m_j + (q/k) sum_{j<=k} w_j``.
    """
    _check_q(q)
    if n < 1:
        raise ConfigurationError("n must be >= 1")
    if exact is None:
        exact = _is_rational(q)
    if exact:
        q = as_exact(q)
    else:
        q = float(q)
    p = 1 - q
    m = _mean_closed(n, q, exact)
    zero = Fraction(0) if exact else 0.0
    w = zero
    sum_m, sum_w = zero, zero
    for k in range(1, n):
        sum_m += m[k - 1]
        sum_w += w
        w = 1 + 2 * p * m[k - 1] + p * w + 2 * q / k * sum_m + q / k * sum_w
    mean = m[n - 1] if exact else float(m[n - 1])
    return OccasionalMoments(n, mean, w, w - mean * mean)


def occasional_mean_recursion(n: int, q, exact: bool | None = None):
    """``m_n`` from ``m_{k+1} = 1 + p m_k + (q/k) sum_{j<=k} m_j`` (cross-check)."""
    if exact is None:
        exact = _is_rational(q)
    q = as_exact(q) if exact else float(q)
    p = 1 - q
    m = Fraction(0) if exact else 0.0
    total = m
    for k in range(1, n):
        total += m
        m = 1 + p * m + q / k * total
    return m


def occasional_second_moment_differenced(n: int, q) -> float:
    """``w_n`` summed from the closed form of ``w_{j+2} - w_{j+1}`` (cross-check).

    ``w_{j+2} - w_{j+1} = (1+p)(1-p^{j+1})/(q^2 (j+1)) - 2 p^{j+1}/q
    + (2/(j+1)) sum_{k<=j+1} m_k p^{j+1-k}``, starting from ``w_2 = 1``.
    """
    _check_q(q)
    q = float(q)
    p = 1.0 - q
    if n == 1:
        return 0.0
    m = _mean_closed(n, q, False)
    w = 1.0
    A = 0.0
    for j in range(1, n - 1):
        if j == 1:
            A = m[0] * p + m[1]
        else:
            A = p * A + m[j]
        w += (1 + p) * (1 - p ** (j + 1)) / (q * q * (j + 1)) - 2 * p ** (j + 1) / q + 2 * A / (j + 1)
    return w


# ---------------------------------------------------------------------------
# Backward Markov chain


def backward_transitions(n: int, q):
    """``(pi_11, pi_01)`` at backward steps k = 1..n-1 (floats, or Fractions if q is rational)."""
    exact = _is_rational(q)
    out = []
    for k in range(1, n):
        j = n - k
        if exact:
            out.append((1 - q + Fraction(q) / j, Fraction(1, j)))
        else:
            out.append((1 - q + q / j, 1.0 / j))
    return out


def backward_chain_sample(n: int, q, rng: RandomStream, size=None):
    """``T_{n+1} = Z_1 + ... + Z_n`` with ``Z_n, Z_{n-1}, ...`` from the reversed chain."""
    _check_q(q)
    if n < 1:
        raise ConfigurationError("n must be >= 1")
    q = float(q)
    p = 1.0 - q
    m = 1 if size is None else size
    g = rng.generator
    z = g.random(m) < p + q / n
    total = z.astype(np.int64)
    for k in range(1, n):
        j = n - k
        prob = np.where(z, p + q / j, 1.0 / j)
        z = g.random(m) < prob
        total += z
    return int(total[0]) if size is None else total


def backward_chain_pmf(n: int, q) -> Pmf:
    """Exact law of the chain sum by forward propagation over (state, count)."""
    _check_q(q)
    exact = _is_rational(q)
    one = Fraction(1) if exact else 1.0
    q = as_exact(q) if exact else float(q)
    p = 1 - q
    start = p + q / n
    # dist[state][count]
    dist = {1: {1: start}, 0: {0: one - start}}
    for pi11, pi01 in backward_transitions(n, q):
        nxt = {0: {}, 1: {}}
        for state, counts in dist.items():
            up = pi11 if state == 1 else pi01
            for c, w in counts.items():
                nxt[1][c + 1] = nxt[1].get(c + 1, 0) + w * up
                nxt[0][c] = nxt[0].get(c, 0) + w * (one - up)
        dist = nxt
    total: dict = {}
    for counts in dist.values():
        for c, w in counts.items():
            total[c] = total.get(c, 0) + w
    if exact:
        return Pmf.from_exact(total)
    return Pmf.from_floats(list(total), list(total.values()))


def backward_chain_marginals(n: int, q) -> np.ndarray:
    """``P(Z_k = 1)`` for k = 1..n."""
    q = float(q)
    p = 1.0 - q
    out = np.empty(n)
    cur = p + q / n
    out[n - 1] = cur
    for k in range(1, n):
        j = n - k
        cur = cur * (p + q / j) + (1 - cur) / j
        out[j - 1] = cur
    return out


@dataclass(frozen=True)
class DobrushinDiagnostic:
    n: int
    q: float
    alpha: float
    variance_sum: float
    variance_lower_bound: float

    @property
    def condition(self) -> float:
        """``alpha_n^3 * sum Var Z_k``; must diverge for the chain CLT."""
        return self.alpha**3 * self.variance_sum


def dobrushin_diagnostic(n: int, q) -> DobrushinDiagnostic:
    """Ergodicity coefficient of the backward chain and the variance growth it must beat."""
    _check_q(q)
    if n < 2:
        raise ConfigurationError("n >= 2 required")
    qf = float(q)
    p = 1.0 - qf
    j = np.arange(1, n, dtype=float)  # j = n - k over backward steps k = 1..n-1
    diff = np.abs((p + qf / j) - 1.0 / j)
    alpha = float(np.min(1.0 - diff))
    if alpha < qf - 1e-15:
        raise InvariantError(f"alpha_n = {alpha} < q = {qf}")
    marg = backward_chain_marginals(n, qf)
    var_sum = math.fsum(marg * (1 - marg))
    bound_terms = qf * (j - 1) / (j * j)
    per_k = marg[:-1] * (1 - marg[:-1])
    # Z_k sits at backward step n - k, i.e. j = k
    if np.any(per_k < bound_terms - 1e-15):
        raise InvariantError("Var Z_k fell below its lower bound")
    return DobrushinDiagnostic(n, qf, alpha, var_sum, math.fsum(bound_terms))


# ---------------------------------------------------------------------------
# Martingale over reversion epochs


def correction_weights(q: float, tolerance: float):
    """Weights ``q p^{r-1} r (r+1) / 2`` for r = 1..R and the tail bound over ``N + 1 >= 2``.

    ``R`` is the first cut whose geometric-ratio majorant of the remaining
    terms, divided by 2, is below ``tolerance``.
    """
    if tolerance <= 0:
        raise ConfigurationError("series_tolerance must be > 0")
    if not (0 < q < 1):
        raise ConfigurationError("q must lie in (0, 1) for the epoch martingale")
    p = 1.0 - q
    weights = []
    R = 0
    while True:
        R += 1
        weights.append(q * p ** (R - 1) * R * (R + 1) / 2)
        ratio = p * (R + 3) / (R + 1)
        if ratio < 1:
            nxt = q * p**R * (R + 1) * (R + 2) / 2
            tail = nxt / (1 - ratio)
            if tail / 2 < tolerance:
                return np.array(weights), tail


def reversion_correction(N, q: float, tolerance: float = 1e-12):
    """``sum_r q p^{r-1} r(r+1) / (2 (N + r))`` truncated, with its error bound."""
    w, tail = correction_weights(float(q), tolerance)
    N = np.asarray(N, dtype=float)
    r = np.arange(1, len(w) + 1)
    value = (w / (N[..., None] + r)).sum(axis=-1)
    return value, tail / (N + 1)


@dataclass(frozen=True, eq=False)
class OccasionalMartingaleTrace:
    epochs: np.ndarray  # N(1..J)
    S: np.ndarray  # S_{N(j)}
    M: np.ndarray  # M_1..M_J
    values: np.ndarray  # T_1..T_{N(J)}
    intervals: np.ndarray  # Y_1..Y_J
    truncation_error: float


def _martingale_batch(count: int, q: float, rng: RandomStream, size: int, tolerance: float):
    g = rng.generator
    Y = g.geometric(q, size=(size, count)).astype(np.int64)
    N = np.cumsum(Y, axis=1)
    L = int(N[:, -1].max())
    col = np.arange(L)
    rows = np.arange(size)
    T = np.where(col < N[:, :1], col, 0).astype(np.int64)
    S_inc = np.empty((size, count), dtype=np.int64)
    S_inc[:, 0] = N[:, 0] * (N[:, 0] - 1) // 2
    for j in range(count - 1):
        Nj = N[:, j]
        U = g.integers(1, Nj + 1)
        fresh = 1 + T[rows, U - 1]
        block = (col >= Nj[:, None]) & (col < N[:, j + 1 : j + 2])
        T = np.where(block, fresh[:, None] + col - Nj[:, None], T)
        y = Y[:, j + 1]
        S_inc[:, j + 1] = S_inc[:, j] + y * fresh + y * (y - 1) // 2
    S_direct = np.cumsum(T, axis=1)[rows[:, None], N - 1]
    if np.any(S_direct != S_inc):
        raise InvariantError("S increment identity failed")
    corr, err = reversion_correction(N, q, tolerance)
    drift = np.concatenate([np.zeros((size, 1)), np.cumsum(corr[:, :-1], axis=1)], axis=1)
    M = S_direct / N - drift
    return T, N, Y, S_direct, M, err[:, :-1].sum(axis=1) if count > 1 else np.zeros(size)


def occasional_martingale_trace(reversion_count: int, q, rng: RandomStream, series_tolerance: float = 1e-12) -> OccasionalMartingaleTrace:
    """Simulate ``reversion_count`` epochs and the martingale
    ``M_j = S_{N(j)}/N(j) - sum_{i<j} c(N(i))``.

    The pathwise identity ``S_{N(j+1)} = S_{N(j)} + Y T_{N(j)+1} + Y(Y-1)/2``
    is asserted on the trace.
    """
    if reversion_count < 1:
        raise ConfigurationError("reversion_count must be >= 1")
    T, N, Y, S, M, err = _martingale_batch(reversion_count, float(q), rng, 1, series_tolerance)
    return OccasionalMartingaleTrace(N[0], S[0], M[0], T[0, : N[0, -1]], Y[0], float(err[0]))


def occasional_martingale_paths(
    reversion_count: int,
    q,
    rng: RandomStream,
    size: int,
    series_tolerance: float = 1e-12,
    threads: int = 1,
) -> np.ndarray:
    """``M_1..M_J`` for ``size`` independent runs, shape (size, J)."""
    if reversion_count < 1:
        raise ConfigurationError("reversion_count must be >= 1")
    correction_weights(float(q), series_tolerance)

    def run(stream, m):
        return _martingale_batch(reversion_count, float(q), stream, m, series_tolerance)[4]

    return sample_in_chunks(run, size, rng, threads)
