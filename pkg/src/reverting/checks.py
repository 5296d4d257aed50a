"""Verification suites: oracle equivalences and invariants, run by ``reverting verify``."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from . import branching, clock, integral, nonuniform, occasional, verify, walk
from .core import UNIFORM, Explicit, FiniteDiscrete, Occasional, Rademacher, RandomStream

CHECK_SEED = 20240613


@dataclass(frozen=True)
class CheckResult:
    suite: str
    name: str
    passed: bool
    detail: str = ""


def _exact_eq(a, b) -> bool:
    return a.as_dict(exact=True) == b.as_dict(exact=True)


# each check returns (passed, detail)


def _clock_vs_oracle():
    bad = [n for n in range(1, verify.CLOCK_ORACLE_MAX_N + 1) if not _exact_eq(clock.clock_pmf(n), verify.enumerate_clock(n))]
    return not bad, f"mismatch at n={bad}" if bad else "n<=9 exact"


def _stirling():
    bad = []
    for n in range(1, 13):
        pmf = clock.clock_pmf(n + 1).as_dict(exact=True)
        for k in range(0, n + 1):
            if pmf.get(k, 0) != Fraction(clock.stirling_first(n, k), math.factorial(n)):
                bad.append((n, k))
    return not bad, f"mismatch at {bad[:3]}" if bad else "n<=12 exact"


def _clock_moments():
    bad = []
    for n in range(1, 14):
        pmf, mom = clock.clock_pmf(n), clock.clock_moments(n, exact=True)
        if pmf.mean() != mom.mean or pmf.variance() != mom.variance:
            bad.append(n)
    return not bad, f"mismatch at n={bad}" if bad else "n<=13 exact"


def _weighted_vs_oracle():
    law = Explicit(tuple(range(1, 10)))
    bad = [n for n in range(1, 10) if not _exact_eq(nonuniform.weighted_clock_pmf(law, n), verify.enumerate_clock(n, law))]
    return not bad, f"mismatch at n={bad}" if bad else "alpha_k = k, n<=9"


def _clock_simulation():
    n, size = 30, 40000
    rng = RandomStream(CHECK_SEED, 1)
    T_rec = clock.clock_paths(n, rng.spawn(0), size)[0][:, -1]
    T_ber = clock.simulate_clock_bernoulli(n, rng.spawn(1), size)
    pmf = clock.clock_pmf(n)
    p1 = verify.chi_square(T_rec, pmf).pvalue
    p2 = verify.chi_square(T_ber, pmf).pvalue
    return min(p1, p2) > 1e-4, f"chi-square p-values {p1:.3g}, {p2:.3g}"


def _walk_vs_oracle():
    bad = []
    for n in range(1, verify.WALK_ORACLE_MAX_N):
        for p in (Fraction(1, 2), Fraction(1, 3)):
            joint = verify.enumerate_walk(n, Rademacher(p))
            if verify.joint_marginal(joint, 1).as_dict(exact=True) != walk.walk_pmf_simple(n, p).as_dict(exact=True):
                bad.append((n, p))
    return not bad, f"mismatch at {bad}" if bad else "n<=6 exact"


def _walk_conditional():
    step = FiniteDiscrete.from_mapping({-1: Fraction(1, 4), 0: Fraction(1, 4), 2: Fraction(1, 2)})
    joint = verify.enumerate_walk(6, step)
    for t in verify.joint_marginal(joint, 0).values:
        conv = {0: Fraction(1)}
        for _ in range(t):
            nxt: dict = {}
            for x, px in conv.items():
                for v, pv in zip(step.values, step.probs):
                    nxt[x + v] = nxt.get(x + v, 0) + px * pv
            conv = nxt
        if verify.conditional_given(joint, t).as_dict(exact=True) != {k: v for k, v in conv.items() if v}:
            return False, f"R_6 | T_6={t} is not the {t}-step sum"
    return True, "all t in support"


def _walk_routes():
    step = FiniteDiscrete.from_mapping({-1: Fraction(1, 3), 1: Fraction(2, 3)})
    for n in range(1, 14):
        if walk.walk_pmf(n, step).as_dict(exact=True) != walk.walk_pmf_simple(n, Fraction(2, 3)).as_dict(exact=True):
            return False, f"Stirling and mixture routes differ at n={n}"
    pmf = walk.walk_pmf(12, step)
    worst = 0.0
    for theta in np.linspace(-3, 3, 13):
        direct = sum(p * np.exp(1j * theta * x) for x, p in zip(pmf.values, pmf.probs))
        worst = max(worst, abs(direct - walk.walk_char_function(12, theta, step)))
    return worst < 1e-12, f"cf residual {worst:.2e}"


def _integral_vs_oracle():
    for n in range(1, verify.INTEGRATED_ORACLE_MAX_N):
        o = verify.enumerate_integrated(n)
        if o.var_M != integral.martingale_variance(n, exact=True).variance or o.mean_M != 0:
            return False, f"Var M_{n} mismatch"
        if o.var_S != integral.integral_variance(n, exact=True):
            return False, f"Var S_{n} mismatch"
        if n >= 2 and o.cov_next != integral.clock_covariance(n, 1, exact=True):
            return False, f"Cov(T_{n}, T_{n + 1}) mismatch"
    return True, "n<=7 exact"


def _hoeffding():
    rng = RandomStream(CHECK_SEED, 2)
    T = clock.clock_paths(200, rng, 2000)[0]
    worst = integral.hoeffding_check(integral.martingale_paths(T))
    return worst <= integral.INCREMENT_BOUND, f"max increment {worst:.4f}"


def _weighted_variance_routes():
    for law in (Explicit(tuple(range(1, 12))), Explicit((1, 3, 2, 5, 1, 4, 2, 2, 7, 1, 1))):
        for n in range(1, 12):
            a = nonuniform.weighted_martingale_variance(law, n, exact=True)
            b = nonuniform.weighted_martingale_variance_series(law, n, exact=True)
            if a != b:
                return False, f"recursion and series differ at n={n}"
    uni = Explicit((1,) * 11)
    for n in range(1, 12):
        if nonuniform.weighted_martingale_variance(uni, n, exact=True) != integral.martingale_variance(n, exact=True).variance:
            return False, "unit weights disagree with the uniform variance"
    return True, "n<=11 exact"


def _occasional_vs_oracle():
    for q in (Fraction(1, 2), Fraction(1, 3), Fraction(1)):
        for n in range(1, verify.OCCASIONAL_ORACLE_MAX_N + 1):
            oracle = verify.enumerate_clock(n, Occasional(q))
            if not _exact_eq(occasional.occasional_pmf(n, q), oracle):
                return False, f"pmf mismatch n={n} q={q}"
            if n >= 2 and not _exact_eq(occasional.backward_chain_pmf(n - 1, q), oracle):
                return False, f"backward chain mismatch n={n} q={q}"
    return True, "n<=8 exact"


def _occasional_moments():
    for q in (Fraction(1, 2), Fraction(1, 3)):
        for n in range(1, 14):
            pmf, mom = occasional.occasional_pmf(n, q), occasional.occasional_moments(n, q)
            if pmf.mean() != mom.mean or pmf.variance() != mom.variance:
                return False, f"moment mismatch n={n} q={q}"
            if occasional.occasional_mean_recursion(n, q) != mom.mean:
                return False, f"mean recursion mismatch n={n}"
            if abs(occasional.occasional_second_moment_differenced(n, q) - float(mom.second_moment)) > 1e-9:
                return False, f"differenced second moment mismatch n={n}"
    return True, "n<=13 exact"


def _occasional_gf():
    worst = 0.0
    for s in np.linspace(0.1, 0.9, 5):
        for z in np.linspace(0.1, 0.5, 5):
            a = occasional.occasional_bivariate_gf(float(s), float(z), 0.4)
            b = occasional.occasional_gf_series(float(s), float(z), 0.4)
            worst = max(worst, abs(a - b))
    return worst < 1e-8, f"max residual {worst:.2e}"


def _dobrushin():
    for q in (0.25, 0.5, 0.75):
        for n in (10, 100, 1000):
            d = occasional.dobrushin_diagnostic(n, q)
            if d.alpha < q:
                return False, f"alpha < q at n={n}"
    return True, "alpha_n >= q"


def _occasional_identity():
    rng = RandomStream(CHECK_SEED, 3)
    occasional.occasional_martingale_paths(15, 0.5, rng, 2000)
    return True, "S increment identity asserted on 2000 traces"


_HALF = branching.OffspringLaw((Fraction(1, 2), 0, Fraction(1, 2)))
_AFFINE = branching.OffspringLaw((Fraction(3, 4), Fraction(1, 4)))


def _h_recursion():
    grid = [i / 20 for i in range(21)]
    worst = max(branching.verify_H_recursion(n, law, grid) for law in (_HALF, _AFFINE) for n in range(1, 9))
    return worst < 1e-10, f"max residual {worst:.2e}"


def _branching_exact():
    if branching.extinction_probability(3, _HALF) != Fraction(9, 16):
        return False, "P(X_3 = 0) != 9/16"
    if branching.extinction_probability(4, _AFFINE) != Fraction(113, 128):
        return False, "affine extinction at n=4"
    for n in range(1, 12):
        if branching.reverting_gw_pgf(n, _HALF, Fraction(1)) != 1:
            return False, f"H_{n}(1) != 1"
    return True, "exact values and normalisation"


SUITES: dict[str, list[tuple[str, Callable]]] = {
    "clock": [
        ("clock_pmf equals enumeration", _clock_vs_oracle),
        ("Stirling identity", _stirling),
        ("clock moments match pmf", _clock_moments),
        ("weighted pmf equals enumeration", _weighted_vs_oracle),
        ("simulation routes fit the pmf", _clock_simulation),
    ],
    "walk": [
        ("walk pmf equals enumeration", _walk_vs_oracle),
        ("conditional law given the clock", _walk_conditional),
        ("pmf routes and characteristic function agree", _walk_routes),
    ],
    "integral": [
        ("martingale moments equal enumeration", _integral_vs_oracle),
        ("increments bounded by 3/2", _hoeffding),
        ("weighted variance recursion and series agree", _weighted_variance_routes),
    ],
    "occasional": [
        ("occasional pmf and backward chain equal enumeration", _occasional_vs_oracle),
        ("occasional moments", _occasional_moments),
        ("closed g.f. matches series", _occasional_gf),
        ("Dobrushin coefficient at least q", _dobrushin),
        ("epoch S-increment identity", _occasional_identity),
    ],
    "branching": [
        ("H recursion residual", _h_recursion),
        ("exact extinction values", _branching_exact),
    ],
}


def run_suite(name: str = "all") -> list[CheckResult]:
    names = list(SUITES) if name == "all" else [name]
    out = []
    for suite in names:
        for label, fn in SUITES[suite]:
            try:
                passed, detail = fn()
            except Exception as exc:  # a crash is a failed check, reported not raised
                passed, detail = False, f"{type(exc).__name__}: {exc}"
            out.append(CheckResult(suite, label, bool(passed), detail))
    return out
