"""Brute-force oracles and the statistical test kit.

The enumerators walk every reversion history (and every step value) with
exact rational weights; they share no code with the generating-function
routes they are used to check.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping

import numpy as np
from scipy import stats

from .core import (
    UNIFORM,
    ConfigurationError,
    MASS_TOLERANCE,
    Occasional,
    Pmf,
    PowerLaw,
    ReversionLaw,
    SizeError,
    Uniform,
    as_exact,
    reversion_weights,
)

CLOCK_ORACLE_MAX_N = 9
OCCASIONAL_ORACLE_MAX_N = 8
WALK_ORACLE_MAX_N = 7
INTEGRATED_ORACLE_MAX_N = 8


def _branches(law: ReversionLaw, k: int):
    """Exact ``(target, probability)`` pairs for the reversion at step k.

    Occasional laws enumerate the gate explicitly: ``(I = 0, V = k)`` and
    ``(I = 1, U = j)``; the two ``V = k`` outcomes stay separate branches.
    """
    if isinstance(law, Occasional):
        q = as_exact(law.q)
        return [(k, 1 - q)] + [(j, q / k) for j in range(1, k + 1)]
    if isinstance(law, Uniform):
        return [(j, Fraction(1, k)) for j in range(1, k + 1)]
    if isinstance(law, PowerLaw) and not float(law.beta).is_integer():
        raise ConfigurationError("enumeration needs rational weights")
    alpha = [as_exact(a) for a in reversion_weights(law, k, exact=True)]
    total = sum(alpha)
    return [(j, a / total) for j, a in enumerate(alpha, start=1) if a]


def _histories(n: int, law: ReversionLaw):
    """Yield ``(T_1..T_n, probability)`` over all reversion histories."""
    tables = [_branches(law, k) for k in range(1, n)]

    def rec(T, prob, k):
        if k == n:
            yield T, prob
            return
        for j, pj in tables[k - 1]:
            yield from rec(T + (1 + T[j - 1],), prob * pj, k + 1)

    yield from rec((0,), Fraction(1), 1)


def _check_bound(n: int, top: int, what: str):
    if not (1 <= n <= top):
        raise SizeError(f"{what} enumeration supports 1 <= n <= {top}, got {n}")


def enumerate_clock(n: int, law: ReversionLaw = UNIFORM) -> Pmf:
    """Exact pmf of ``T_n`` by summing over every reversion history."""
    top = OCCASIONAL_ORACLE_MAX_N if isinstance(law, Occasional) else CLOCK_ORACLE_MAX_N
    _check_bound(n, top, "clock")
    out: dict = {}
    for T, prob in _histories(n, law):
        out[T[-1]] = out.get(T[-1], Fraction(0)) + prob
    return Pmf.from_exact(out)


def enumerate_walk(n: int, step_law, law: ReversionLaw = UNIFORM) -> dict:
    """Exact joint law ``{(T_n, R_n): probability}`` of the coupled clock and walk.

    Every reversion sequence and every step value is enumerated, with
    ``R_{k+1} = R_{U(k)} + X_k`` applied literally.
    """
    _check_bound(n, WALK_ORACLE_MAX_N, "walk")
    values, probs = step_law.lattice()
    if len(values) > 3:
        raise SizeError("walk enumeration supports step laws with at most 3 atoms")
    steps = [(int(v), as_exact(p)) for v, p in zip(values, probs) if p]
    tables = [_branches(law, k) for k in range(1, n)]
    out: dict = {}

    def rec(T, R, prob, k):
        if k == n:
            key = (T[-1], R[-1])
            out[key] = out.get(key, Fraction(0)) + prob
            return
        for j, pj in tables[k - 1]:
            for x, px in steps:
                rec(T + (1 + T[j - 1],), R + (R[j - 1] + x,), prob * pj * px, k + 1)

    rec((0,), (0,), Fraction(1), 1)
    return out


def joint_marginal(joint: Mapping, axis: int) -> Pmf:
    """Marginal pmf of coordinate ``axis`` of an exact joint law."""
    out: dict = {}
    for key, p in joint.items():
        out[key[axis]] = out.get(key[axis], Fraction(0)) + p
    return Pmf.from_exact(out)


def conditional_given(joint: Mapping, t: int) -> Pmf:
    """Law of ``R_n`` given ``T_n = t``."""
    sub = {r: p for (tt, r), p in joint.items() if tt == t}
    total = sum(sub.values())
    if total == 0:
        raise ConfigurationError(f"T_n = {t} has probability zero")
    return Pmf.from_exact({r: p / total for r, p in sub.items()})


@dataclass(frozen=True)
class IntegratedOracle:
    n: int
    joint: dict  # {(S_n, T_n): probability}
    mean_M: Fraction
    var_M: Fraction
    var_S: Fraction
    cov_next: Fraction  # Cov(T_n, T_{n+1})


def enumerate_integrated(n: int) -> IntegratedOracle:
    """Exact law of ``(S_n, T_n)`` and the martingale moments, uniform reversions."""
    _check_bound(n, INTEGRATED_ORACLE_MAX_N, "integrated")
    H = sum((Fraction(1, k) for k in range(2, n + 1)), Fraction(0))
    ES = n * H
    joint: dict = {}
    eM = eM2 = eS2 = Fraction(0)
    eTn = eTn1 = eTT = Fraction(0)
    for T, prob in _histories(n + 1, UNIFORM):
        S = sum(T[:n])
        key = (S, T[n - 1])
        joint[key] = joint.get(key, Fraction(0)) + prob
        M = (S - ES) / n
        eM += prob * M
        eM2 += prob * M * M
        eS2 += prob * S * S
        eTn += prob * T[n - 1]
        eTn1 += prob * T[n]
        eTT += prob * T[n - 1] * T[n]
    return IntegratedOracle(n, joint, eM, eM2 - eM * eM, eS2 - ES * ES, eTT - eTn * eTn1)


# ---------------------------------------------------------------------------
# Statistical test kit


def _check_normalised(pmf: Pmf):
    if pmf.exact is not None:
        if sum(pmf.exact) != 1:
            raise ConfigurationError("pmf is not normalised")
    elif abs(math.fsum(pmf.probs) - 1) > MASS_TOLERANCE:
        raise ConfigurationError("pmf is not normalised")


def ks_statistic(pmf: Pmf, loc=None, scale=None, convention: str = "right") -> float:
    """Kolmogorov distance between a lattice pmf and ``N(loc, scale^2)``.

    ``convention="right"`` compares the CDF at each support point,
    ``max_i |F(x_i) - Phi(z_i)|``. ``"sup"`` also uses the left limits
    ``F(x_i-)`` and so gives the full supremum, which is never below half
    the largest atom. ``loc``/``scale`` default to the pmf's own mean and
    standard deviation.
    """
    _check_normalised(pmf)
    if convention not in ("right", "sup"):
        raise ConfigurationError(f"unknown KS convention {convention!r}")
    x = np.asarray(pmf.values, dtype=float)
    loc = float(pmf.mean()) if loc is None else float(loc)
    scale = math.sqrt(float(pmf.variance())) if scale is None else float(scale)
    if scale < 0:
        raise ConfigurationError("scale must be non-negative")
    if scale == 0:
        z = np.where(x > loc, np.inf, np.where(x < loc, -np.inf, 0.0))
    else:
        z = (x - loc) / scale
    Phi = stats.norm.cdf(z)
    F = np.minimum(np.cumsum(np.asarray(pmf.probs)), 1.0)
    ks = np.abs(F - Phi)
    if convention == "sup":
        left = np.concatenate([[0.0], F[:-1]])
        ks = np.maximum(ks, np.abs(left - Phi))
    return float(ks.max())


@dataclass(frozen=True)
class ChiSquareResult:
    statistic: float
    dof: int
    pvalue: float
    bins: int


def chi_square(counts, expected: Pmf, min_expected: float = 5.0) -> ChiSquareResult:
    """Pearson goodness of fit of observed counts against a pmf.

    ``counts`` is a mapping value -> count or an array of raw samples.
    Adjacent values (in sorted order over the union of supports) are pooled
    left to right until each bin's expected count reaches ``min_expected``;
    a short final bin is merged into its neighbour.
    """
    _check_normalised(expected)
    if not isinstance(counts, Mapping):
        vals, cnt = np.unique(np.asarray(counts), return_counts=True)
        counts = dict(zip(vals.tolist(), cnt.tolist()))
    total = sum(counts.values())
    if total <= 0:
        raise ConfigurationError("no observations")
    exp = expected.as_dict()
    support = sorted(set(exp) | set(counts))
    obs_bins, exp_bins = [], []
    o = e = 0.0
    for v in support:
        o += counts.get(v, 0)
        e += total * exp.get(v, 0.0)
        if e >= min_expected:
            obs_bins.append(o)
            exp_bins.append(e)
            o = e = 0.0
    if o or e:
        if exp_bins:
            obs_bins[-1] += o
            exp_bins[-1] += e
        else:
            obs_bins.append(o)
            exp_bins.append(e)
    obs_arr, exp_arr = np.array(obs_bins), np.array(exp_bins)
    dof = len(obs_arr) - 1
    if dof < 1:
        return ChiSquareResult(0.0, 0, 1.0, len(obs_arr))
    stat = float(np.sum((obs_arr - exp_arr) ** 2 / exp_arr))
    return ChiSquareResult(stat, dof, float(stats.chi2.sf(stat, dof)), len(obs_arr))


def tv_distance(p: Pmf, q: Pmf):
    """Total variation ``(1/2) sum |p(x) - q(x)|``; exact when both pmfs are."""
    if p.is_exact and q.is_exact:
        a, b = p.as_dict(exact=True), q.as_dict(exact=True)
        return sum((abs(a.get(x, 0) - b.get(x, 0)) for x in set(a) | set(b)), Fraction(0)) / 2
    a, b = p.as_dict(), q.as_dict()
    return 0.5 * math.fsum(abs(a.get(x, 0.0) - b.get(x, 0.0)) for x in set(a) | set(b))


def mean_zscore(samples) -> float:
    """``mean / standard error`` of a sample; 0 for a constant zero sample."""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 2:
        raise ConfigurationError("need at least two samples")
    se = x.std(ddof=1) / math.sqrt(x.size)
    m = x.mean()
    if se == 0:
        return 0.0 if m == 0 else math.copysign(math.inf, m)
    return float(m / se)


def binned_increment_test(increments, predictor, bins: int = 10) -> np.ndarray:
    """z-scores of the mean increment within equal-count bins of a predictor.

    A martingale difference has conditional mean zero, so every bin's
    z-score should look standard normal.
    """
    d = np.asarray(increments, dtype=float).ravel()
    x = np.asarray(predictor, dtype=float).ravel()
    if d.shape != x.shape:
        raise ConfigurationError("increments and predictor differ in shape")
    order = np.argsort(x, kind="stable")
    return np.array([mean_zscore(chunk) for chunk in np.array_split(d[order], bins)])


def proportion_zscore(hits: int, trials: int, p: float) -> float:
    """Standardised difference between an empirical and a reference proportion."""
    if not (0 < p < 1):
        return 0.0 if hits == p * trials else math.inf
    return (hits / trials - p) / math.sqrt(p * (1 - p) / trials)
