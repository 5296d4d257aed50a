"""Command-line driver: ``reverting <command> [options]``.

Every command prints ``{meta, params, result}`` as JSON (or a CSV table) to
stdout or ``--out``. Output carries no timestamps, so identical inputs give
byte-identical output.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from fractions import Fraction

import numpy as np

from . import __version__, branching, checks, clock, integral, nonuniform, occasional, walk
from .core import UNIFORM, ConfigurationError, Explicit, PowerLaw, Rademacher, RandomStream, SizeError, sample_in_chunks
from .verify import ks_statistic, mean_zscore

DEFAULT_SAMPLES = 10_000


def _number(text: str) -> Fraction:
    """Parse ``0.25`` or ``1/4`` exactly."""
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigurationError(f"not a number: {text!r}") from exc


def _data_lines(path: str):
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if line:
                yield line


def read_weights(path: str) -> Explicit:
    """One ``alpha_k`` per line."""
    return Explicit(tuple(_number(line) for line in _data_lines(path)))


def read_offspring(path: str) -> branching.OffspringLaw:
    """One ``count probability`` pair per line."""
    mapping: dict = {}
    for line in _data_lines(path):
        parts = line.split()
        if len(parts) != 2:
            raise ConfigurationError(f"expected 'count probability', got {line!r}")
        k = int(parts[0])
        mapping[k] = mapping.get(k, 0) + _number(parts[1])
    if not mapping:
        raise ConfigurationError(f"{path} holds no offspring probabilities")
    return branching.OffspringLaw.from_mapping(mapping)


def _law(spec: str):
    if spec == "uniform":
        return UNIFORM, {"law": "uniform"}
    kind, _, arg = spec.partition(":")
    if kind == "power" and arg:
        beta = _number(arg)
        beta = int(beta) if beta.denominator == 1 else float(beta)
        return PowerLaw(beta), {"law": "power", "beta": beta}
    if kind == "weights" and arg:
        law = read_weights(arg)
        return law, {"law": "weights", "file": arg, "count": len(law.weights)}
    raise ConfigurationError(f"unknown law {spec!r}; use uniform, power:BETA or weights:FILE")


def _mode(text: str) -> tuple[str, str]:
    name, _, arg = text.partition(":")
    return name, arg


def _jsonable(x):
    if isinstance(x, Fraction):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, complex):
        return {"re": x.real, "im": x.imag}
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in x]
    return x


def _pmf_result(pmf, tail_tolerance):
    rows = [{"value": v, "probability": p} for v, p in zip(pmf.values, pmf.probs)]
    if pmf.is_exact:
        for row, e in zip(rows, pmf.exact):
            row["exact"] = str(e)
    meta = {"exact": pmf.is_exact, "tail_tolerance": tail_tolerance, "dropped_mass": pmf.dropped_mass}
    return {"pmf": {str(v): p for v, p in zip(pmf.values, pmf.probs)}, **meta}, rows


def _histogram(samples):
    vals, counts = np.unique(np.asarray(samples), return_counts=True)
    total = counts.sum()
    return [{"value": int(v), "count": int(c), "frequency": c / total} for v, c in zip(vals, counts)]


def _summary(samples):
    x = np.asarray(samples, dtype=float)
    return {"samples": int(x.size), "mean": float(x.mean()), "variance": float(x.var(ddof=1)) if x.size > 1 else 0.0}


# ---------------------------------------------------------------------------
# Commands: each returns (params, result, rows-for-csv)


def cmd_clock(a, rng):
    law, law_params = _law(a.law)
    params = {"n": a.n, **law_params}
    mode, _ = _mode(a.mode)
    uniform = law_params["law"] == "uniform"
    if mode == "pmf":
        pmf = clock.clock_pmf(a.n, a.tail_tolerance) if uniform else nonuniform.weighted_clock_pmf(law, a.n, a.tail_tolerance)
        result, rows = _pmf_result(pmf, a.tail_tolerance)
        return params, result, rows
    if mode == "moments":
        if uniform:
            m = clock.clock_moments(a.n)
            result = {"mean": m.mean, "variance": m.variance, "asymptotic_mean": m.asymptotic_mean, "asymptotic_variance": m.asymptotic_variance}
        else:
            mean, var = nonuniform.weighted_clock_moments(law, a.n)
            result = {"mean": mean, "variance": var}
        return params, result, None
    if mode == "clt":
        if not uniform:
            pmf = nonuniform.weighted_clock_pmf(law, a.n, a.tail_tolerance)
            result = {"ks": ks_statistic(pmf), "max_atom": max(pmf.probs), "dropped_mass": pmf.dropped_mass}
        else:
            d = clock.clock_clt_diagnostic(a.n, a.tail_tolerance)
            result = {"ks": d.ks, "mean": d.mean, "variance": d.variance, "max_atom": d.max_atom, "dropped_mass": d.dropped_mass, "convention": d.convention}
        return params, result, None
    if mode == "simulate":
        params["samples"] = a.samples
        T = _chunked_clock(a, rng, law)
        rows = _histogram(T)
        return params, {**_summary(T), "histogram": rows}, rows
    raise ConfigurationError(f"unknown clock mode {a.mode!r}")


def _chunked_clock(a, rng, law):
    return sample_in_chunks(lambda s, m: clock.simulate_clock_bernoulli(a.n, s, m, law), a.samples, rng, a.threads)


def cmd_walk(a, rng):
    p = _number(a.p)
    params = {"n": a.n, "p": float(p)}
    mode, _ = _mode(a.mode)
    step = Rademacher(p)
    if mode == "pmf":
        pmf = walk.walk_pmf_simple(a.n, p) if a.n <= clock.EXACT_MAX_N and a.tail_tolerance is None else walk.walk_pmf(a.n, step, a.tail_tolerance)
        result, rows = _pmf_result(pmf, a.tail_tolerance)
        return params, result, rows
    if mode == "moments":
        mean, var = walk.walk_moments(a.n, step)
        return params, {"mean": mean, "variance": var}, None
    if mode == "cf":
        thetas = [float(t) for t in a.theta.split(",")]
        params["theta"] = thetas
        rows = []
        for t in thetas:
            v = walk.walk_char_function(a.n, t, step)
            rows.append({"theta": t, "re": v.real, "im": v.imag})
        return params, {"cf": rows}, rows
    if mode == "simulate":
        params["samples"] = a.samples
        R = sample_in_chunks(lambda s, m: walk.sample_walk_recursive(a.n, step, UNIFORM, s, m)[1], a.samples, rng, a.threads)
        rows = _histogram(R)
        return params, {**_summary(R), "histogram": rows}, rows
    raise ConfigurationError(f"unknown walk mode {a.mode!r}")


def cmd_integral(a, rng):
    params = {"n": a.n}
    mode, arg = _mode(a.mode)
    if mode == "variance":
        mv = integral.martingale_variance(a.n)
        result = {"var_M": mv.variance, "Q": mv.q_sum, "limit": mv.limit, "var_S": integral.integral_variance(a.n)}
        return params, result, None
    if mode == "covariance":
        m = int(arg) if arg else 1
        params["m"] = m
        return params, {"covariance": integral.clock_covariance(a.n, m)}, None
    if mode == "simulate":
        params["samples"] = a.samples
        def run(s, size):
            M = integral.martingale_paths(clock.clock_paths(a.n, s, size)[0])
            inc = np.abs(np.diff(M, axis=1)).max(axis=1) if a.n > 1 else np.zeros(size)
            return np.column_stack([M[:, -1], inc])

        out = sample_in_chunks(run, a.samples, rng, a.threads)
        result = {**_summary(out[:, 0]), "max_increment": float(out[:, 1].max()), "increment_bound": integral.INCREMENT_BOUND,
                  "exact_variance": integral.martingale_variance(a.n).variance}
        return params, result, None
    raise ConfigurationError(f"unknown integral mode {a.mode!r}")


def cmd_occasional(a, rng):
    q = _number(a.q)
    params = {"n": a.n, "q": float(q)}
    mode, arg = _mode(a.mode)
    if mode == "pmf":
        result, rows = _pmf_result(occasional.occasional_pmf(a.n, q, a.tail_tolerance), a.tail_tolerance)
        return params, result, rows
    if mode == "moments":
        m = occasional.occasional_moments(a.n, q)
        return params, {"mean": m.mean, "second_moment": m.second_moment, "variance": m.variance, "ratio": m.ratio}, None
    if mode == "gf":
        try:
            s, z = (float(x) for x in arg.split(","))
        except ValueError as exc:
            raise ConfigurationError("gf mode needs gf:S,Z") from exc
        params.update(s=s, z=z)
        closed = occasional.occasional_bivariate_gf(s, z, q)
        series = occasional.occasional_gf_series(s, z, q)
        return params, {"closed_form": closed, "series": series, "residual": abs(closed - series)}, None
    if mode == "dobrushin":
        d = occasional.dobrushin_diagnostic(a.n, q)
        result = {"alpha": d.alpha, "variance_sum": d.variance_sum, "variance_lower_bound": d.variance_lower_bound, "condition": d.condition}
        return params, result, None
    if mode == "martingale":
        params.update(epochs=a.epochs, samples=a.samples)
        M = occasional.occasional_martingale_paths(a.epochs, float(q), rng, a.samples, threads=a.threads)
        d = np.diff(M, axis=1)
        rows = [{"epoch": j + 2, "mean_increment": float(d[:, j].mean()), "z": mean_zscore(d[:, j])} for j in range(d.shape[1])]
        return params, {"final_mean": float(M[:, -1].mean()), "increments": rows}, rows
    raise ConfigurationError(f"unknown occasional mode {a.mode!r}")


def cmd_branching(a, rng):
    law = read_offspring(a.offspring)
    params = {"n": a.n, "offspring": {str(k): float(p) for k, p in enumerate(law.probs) if p}}
    mode, arg = _mode(a.mode)
    if mode == "pgf":
        s = _number(arg) if arg else Fraction(1)
        params["s"] = float(s)
        value = branching.reverting_gw_pgf(a.n, law, s if law.exact else float(s))
        return params, {"pgf": value}, None
    if mode == "extinction":
        ns = range(1, a.n + 1)
        rows = [{"n": k, "extinction": float(branching.extinction_probability(k, law))} for k in ns]
        return params, {"extinction": rows[-1]["extinction"], "ladder": rows}, rows
    if mode == "simulate":
        params.update(samples=a.samples, population_cap=a.population_cap)
        X, capped = branching.sample_reverting_gw(a.n, law, rng, a.samples, a.population_cap, a.threads)
        last = X[:, -1]
        ok = ~capped
        result = {
            "samples": a.samples,
            "capped": int(capped.sum()),
            "extinct_fraction": float(np.mean(last == 0)),
            "exact_extinction": float(branching.extinction_probability(a.n, law)),
            "mean_uncapped": float(last[ok].mean()) if ok.any() else math.nan,
        }
        return params, result, None
    raise ConfigurationError(f"unknown branching mode {a.mode!r}")


def cmd_verify(a, rng):
    results = checks.run_suite(a.suite)
    rows = [{"suite": r.suite, "check": r.name, "passed": r.passed, "detail": r.detail} for r in results]
    failures = [row for row in rows if not row["passed"]]
    return {"suite": a.suite}, {"passed": not failures, "checks": rows, "failures": failures}, rows


COMMANDS = {
    "clock": cmd_clock,
    "walk": cmd_walk,
    "integral": cmd_integral,
    "occasional": cmd_occasional,
    "branching": cmd_branching,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    env_seed = os.environ.get("REVERT_SEED")
    common.add_argument("--seed", type=int, default=int(env_seed) if env_seed else 0, help="random seed (default: $REVERT_SEED or 0)")
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--out", help="write output here instead of stdout")

    sized = argparse.ArgumentParser(add_help=False)
    sized.add_argument("--n", type=int, required=True)
    sized.add_argument("--samples", type=int, default=DEFAULT_SAMPLES)
    sized.add_argument("--tail-tolerance", type=float, default=None, help="0 forces exact arithmetic")

    parser = argparse.ArgumentParser(prog="reverting", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("clock", parents=[common, sized])
    p.add_argument("--law", default="uniform")
    p.add_argument("--mode", default="pmf", help="pmf|moments|clt|simulate")

    p = sub.add_parser("walk", parents=[common, sized])
    p.add_argument("--p", default="1/2")
    p.add_argument("--mode", default="pmf", help="pmf|moments|cf|simulate")
    p.add_argument("--theta", default="0.5", help="comma-separated angles for cf mode")

    p = sub.add_parser("integral", parents=[common, sized])
    p.add_argument("--mode", default="variance", help="variance|covariance:M|simulate")

    p = sub.add_parser("occasional", parents=[common, sized])
    p.add_argument("--q", required=True)
    p.add_argument("--mode", default="pmf", help="pmf|moments|gf:S,Z|dobrushin|martingale")
    p.add_argument("--epochs", type=int, default=20)

    p = sub.add_parser("branching", parents=[common, sized])
    p.add_argument("--offspring", required=True, help="file of 'count probability' lines")
    p.add_argument("--mode", default="extinction", help="pgf:S|extinction|simulate")
    p.add_argument("--population-cap", type=int, default=branching.DEFAULT_POPULATION_CAP)

    p = sub.add_parser("verify", parents=[common])
    p.add_argument("--suite", choices=("all",) + tuple(checks.SUITES), default="all")
    return parser


def _render(doc: dict, rows, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(_jsonable(doc), indent=2) + "\n"
    buf = io.StringIO()
    if rows is None:
        rows = [{"key": k, "value": v} for k, v in _jsonable(doc["result"]).items() if not isinstance(v, (dict, list))]
    rows = _jsonable(rows)
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]) if rows else ["key", "value"], lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def main(argv=None) -> int:
    parser = build_parser()
    a = parser.parse_args(argv)
    if a.threads < 1:
        parser.error("--threads must be >= 1")
    try:
        rng = RandomStream(a.seed)
        params, result, rows = COMMANDS[a.command](a, rng)
    except (ConfigurationError, SizeError, OSError) as exc:
        print(f"reverting {a.command}: error: {exc}", file=sys.stderr)
        return 2
    meta = {"version": __version__, "command": a.command, "seed": a.seed, "threads": a.threads}
    if hasattr(a, "tail_tolerance"):
        meta["tail_tolerance"] = a.tail_tolerance
    text = _render({"meta": meta, "params": params, "result": result}, rows, a.format)
    if a.out:
        with open(a.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if a.command == "verify" and not result["passed"]:
        return 1
    return 0
