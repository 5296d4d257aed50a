"""Shared types, reversion probabilities and seeded random streams.

Indices are 1-based everywhere in the public API: ``U(k)`` takes values in
``{1, ..., k}`` and trajectories are reported as ``T_1, ..., T_n``.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import Callable, Mapping, Union

import numpy as np

Number = Union[float, Fraction]

MASS_TOLERANCE = 1e-12


class ConfigurationError(ValueError):
    """Invalid law parameters or a request the law cannot satisfy."""


class SizeError(ValueError):
    """Requested size is outside the supported exact range."""


class InvariantError(AssertionError):
    """A proven invariant failed at runtime; this indicates a bug."""


def as_exact(x) -> Fraction:
    """Exact rational view of ``x`` (floats convert to their binary value)."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, Rational)):
        return Fraction(x)
    if isinstance(x, (float, np.floating)):
        if not math.isfinite(x):
            raise ConfigurationError(f"cannot represent {x!r} exactly")
        return Fraction(float(x))
    raise ConfigurationError(f"cannot represent {x!r} exactly")


# ---------------------------------------------------------------------------
# Reversion laws


@dataclass(frozen=True)
class Uniform:
    """``U(n)`` uniform on ``{1, ..., n}``."""


@dataclass(frozen=True)
class PowerLaw:
    """Weights ``alpha_k = k**beta``."""

    beta: float

    def __post_init__(self):
        if not math.isfinite(float(self.beta)):
            raise ConfigurationError("beta must be finite")


@dataclass(frozen=True)
class Explicit:
    """Explicit positive weights ``alpha_1, alpha_2, ...``."""

    weights: tuple

    def __post_init__(self):
        w = tuple(self.weights)
        if not w:
            raise ConfigurationError("at least one weight is required")
        for a in w:
            if not a > 0:
                raise ConfigurationError(f"weights must be strictly positive, got {a!r}")
        object.__setattr__(self, "weights", w)


@dataclass(frozen=True)
class Occasional:
    """Reversion attempted with probability ``q``, otherwise ``V(n) = n``."""

    q: Number

    def __post_init__(self):
        if not (0 < self.q <= 1):
            raise ConfigurationError(f"q must lie in (0, 1], got {self.q!r}")

    @property
    def p(self) -> Number:
        return 1 - self.q


ReversionLaw = Union[Uniform, PowerLaw, Explicit, Occasional]
UNIFORM = Uniform()


def _neumaier_cumsum(x: np.ndarray) -> np.ndarray:
    out = np.empty(len(x))
    s = 0.0
    c = 0.0
    for i, v in enumerate(x.tolist()):
        t = s + v
        if abs(s) >= abs(v):
            c += (s - t) + v
        else:
            c += (v - t) + s
        s = t
        out[i] = s + c
    return out


def reversion_weights(law: ReversionLaw, n: int, exact: bool = False):
    """Weights ``alpha_1..alpha_n`` (list of Fractions when ``exact``)."""
    if n < 1:
        raise ConfigurationError("n must be >= 1")
    if isinstance(law, Uniform):
        return [Fraction(1)] * n if exact else np.ones(n)
    if isinstance(law, PowerLaw):
        if exact:
            beta = law.beta
            if float(beta) != int(beta):
                raise ConfigurationError("exact power-law weights need an integer beta")
            b = int(beta)
            return [Fraction(k) ** b for k in range(1, n + 1)]
        k = np.arange(1, n + 1, dtype=float)
        return np.exp(float(law.beta) * np.log(k))
    if isinstance(law, Explicit):
        if len(law.weights) < n:
            raise ConfigurationError(
                f"{n} weights needed but only {len(law.weights)} supplied"
            )
        w = law.weights[:n]
        if exact:
            return [as_exact(a) for a in w]
        return np.array([float(a) for a in w])
    raise ConfigurationError(f"law {law!r} has no weight sequence")


def reversion_probabilities(law: ReversionLaw, n: int, exact: bool = False):
    """Success probabilities ``p_k = alpha_k / (alpha_1 + ... + alpha_k)``, k = 1..n.

    ``T_{n+1}`` is the sum of independent Bernoulli(p_k), k = 1..n.
    """
    if isinstance(law, Occasional):
        raise ConfigurationError("occasional reversions are not a Bernoulli product")
    if isinstance(law, Uniform):
        if exact:
            return [Fraction(1, k) for k in range(1, n + 1)]
        if n < 1:
            raise ConfigurationError("n must be >= 1")
        return 1.0 / np.arange(1, n + 1, dtype=float)
    w = reversion_weights(law, n, exact)
    if exact:
        out, total = [], Fraction(0)
        for a in w:
            total += a
            out.append(a / total)
        return out
    p = w / _neumaier_cumsum(w)
    p[0] = 1.0
    return p


def reversion_distribution(law: ReversionLaw, n: int, exact: bool = False):
    """``P(U(n) = k)`` (or ``P(V(n) = k)``) for k = 1..n; the sampler draws from this."""
    if n < 1:
        raise ConfigurationError("n must be >= 1")
    if isinstance(law, Occasional):
        if exact:
            q = as_exact(law.q)
            out = [q / n] * n
            out[-1] += 1 - q
            return out
        out = np.full(n, float(law.q) / n)
        out[-1] += 1 - float(law.q)
        return out
    w = reversion_weights(law, n, exact)
    if exact:
        total = sum(w)
        return [a / total for a in w]
    return w / _neumaier_cumsum(w)[-1]


def sample_reversion(law: ReversionLaw, n: int, rng: "RandomStream") -> int:
    """Draw a single reversion index in ``{1, ..., n}``."""
    if n < 1:
        raise ConfigurationError("n must be >= 1")
    g = rng.generator
    if isinstance(law, Uniform):
        return int(g.integers(1, n + 1))
    if isinstance(law, Occasional):
        if g.random() < float(law.q):
            return int(g.integers(1, n + 1))
        return n
    cum = np.cumsum(reversion_weights(law, n))
    k = int(np.searchsorted(cum, g.random() * cum[-1], side="right")) + 1
    return min(k, n)


# ---------------------------------------------------------------------------
# Step laws


@dataclass(frozen=True)
class Rademacher:
    """+1 with probability ``p``, -1 with probability ``1 - p``."""

    p: Number = Fraction(1, 2)

    def __post_init__(self):
        if not (0 <= self.p <= 1):
            raise ConfigurationError(f"p must lie in [0, 1], got {self.p!r}")

    def lattice(self):
        return (-1, 1), (1 - self.p, self.p)

    def moments(self):
        mu = 2 * self.p - 1
        return mu, 1 - mu * mu

    def sample(self, rng: "RandomStream", size=None):
        g = rng.generator
        return np.where(g.random(size) < float(self.p), 1, -1)

    def cf(self, theta):
        p = float(self.p)
        return p * np.exp(1j * np.asarray(theta)) + (1 - p) * np.exp(-1j * np.asarray(theta))


@dataclass(frozen=True)
class FiniteDiscrete:
    """Integer-valued step with finite support."""

    values: tuple
    probs: tuple

    def __post_init__(self):
        vals = tuple(int(v) for v in self.values)
        probs = tuple(self.probs)
        if len(vals) != len(probs) or not vals:
            raise ConfigurationError("values and probs must be non-empty and equally long")
        if len(set(vals)) != len(vals):
            raise ConfigurationError("support values must be distinct")
        if any(p < 0 for p in probs):
            raise ConfigurationError("probabilities must be non-negative")
        total = sum(probs)
        if isinstance(total, Fraction) or all(isinstance(p, (int, Fraction)) for p in probs):
            if total != 1:
                raise ConfigurationError(f"probabilities sum to {total}, not 1")
        elif abs(float(total) - 1) > MASS_TOLERANCE:
            raise ConfigurationError(f"probabilities sum to {float(total)!r}, not 1")
        order = sorted(range(len(vals)), key=vals.__getitem__)
        object.__setattr__(self, "values", tuple(vals[i] for i in order))
        object.__setattr__(self, "probs", tuple(probs[i] for i in order))

    @classmethod
    def from_mapping(cls, mapping: Mapping[int, Number]) -> "FiniteDiscrete":
        return cls(tuple(mapping), tuple(mapping.values()))

    def lattice(self):
        return self.values, self.probs

    def moments(self):
        mu = sum(v * p for v, p in zip(self.values, self.probs))
        m2 = sum(v * v * p for v, p in zip(self.values, self.probs))
        return mu, m2 - mu * mu

    def sample(self, rng: "RandomStream", size=None):
        p = np.array([float(x) for x in self.probs])
        return rng.generator.choice(np.array(self.values), size=size, p=p / p.sum())

    def cf(self, theta):
        theta = np.asarray(theta)
        return sum(float(p) * np.exp(1j * v * theta) for v, p in zip(self.values, self.probs))


@dataclass(frozen=True)
class GeneralStep:
    """Sampler-only step law, optionally with declared mean and variance.

    ``sampler(generator, size)`` must return i.i.d. draws.
    """

    sampler: Callable[[np.random.Generator, object], np.ndarray]
    mean: float | None = None
    variance: float | None = None
    name: str = "general"
    characteristic: Callable | None = None

    def __post_init__(self):
        if self.variance is not None and self.variance < 0:
            raise ConfigurationError("variance must be non-negative")

    def lattice(self):
        raise ConfigurationError(f"step law {self.name!r} has no integer lattice")

    def moments(self):
        if self.mean is None or self.variance is None:
            raise ConfigurationError(f"step law {self.name!r} declares no moments")
        return self.mean, self.variance

    def sample(self, rng: "RandomStream", size=None):
        return np.asarray(self.sampler(rng.generator, size))

    def cf(self, theta):
        if self.characteristic is None:
            raise ConfigurationError(f"step law {self.name!r} declares no characteristic function")
        return self.characteristic(theta)

    @classmethod
    def normal(cls, mu: float = 0.0, sigma: float = 1.0) -> "GeneralStep":
        return cls(
            lambda g, size: g.normal(mu, sigma, size),
            mean=mu,
            variance=sigma * sigma,
            name=f"normal({mu},{sigma})",
            characteristic=lambda t: np.exp(1j * mu * np.asarray(t) - 0.5 * (sigma * np.asarray(t)) ** 2),
        )


StepLaw = Union[Rademacher, FiniteDiscrete, GeneralStep]


def step_sample(law: StepLaw, rng: "RandomStream", size=None):
    return law.sample(rng, size)


def step_moments(law: StepLaw):
    """(mean, variance) of a single step; exact Fractions for rational laws."""
    return law.moments()


# ---------------------------------------------------------------------------
# Probability mass functions


@dataclass(frozen=True)
class Pmf:
    """Finite pmf on integers, with optional exact rational backing.

    ``dropped_mass`` records probability removed by truncation before
    renormalisation.
    """

    values: tuple
    probs: tuple
    exact: tuple | None = None
    dropped_mass: float = 0.0

    def __post_init__(self):
        if len(self.values) != len(self.probs):
            raise ConfigurationError("values and probs differ in length")
        if any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise ConfigurationError("support must be strictly increasing")
        if any(p < 0 for p in self.probs):
            raise ConfigurationError("negative probability")
        if self.exact is not None:
            if len(self.exact) != len(self.values) or sum(self.exact) != 1:
                raise ConfigurationError("exact probabilities must sum to exactly 1")
        elif abs(math.fsum(self.probs) - 1.0) > MASS_TOLERANCE:
            raise ConfigurationError(f"total mass {math.fsum(self.probs)!r} is not 1")

    @classmethod
    def from_exact(cls, mapping: Mapping[int, Fraction]) -> "Pmf":
        items = sorted((int(k), Fraction(v)) for k, v in mapping.items() if v != 0)
        return cls(
            tuple(k for k, _ in items),
            tuple(float(v) for _, v in items),
            tuple(v for _, v in items),
        )

    @classmethod
    def from_floats(cls, values, probs, dropped_mass: float = 0.0) -> "Pmf":
        values = np.asarray(values)
        probs = np.asarray(probs, dtype=float)
        keep = probs > 0
        values, probs = values[keep], probs[keep]
        order = np.argsort(values, kind="stable")
        values, probs = values[order], probs[order]
        probs = probs / math.fsum(probs)
        return cls(tuple(int(v) for v in values), tuple(float(p) for p in probs), None, float(dropped_mass))

    @property
    def is_exact(self) -> bool:
        return self.exact is not None

    def __len__(self):
        return len(self.values)

    def __getitem__(self, x) -> float:
        return self.as_dict().get(x, 0.0)

    def prob(self, x) -> Number:
        """Exact probability when available, else float."""
        if self.exact is not None:
            return dict(zip(self.values, self.exact)).get(x, Fraction(0))
        return self[x]

    def as_dict(self, exact: bool = False) -> dict:
        if exact:
            if self.exact is None:
                raise ConfigurationError("pmf has no exact backing")
            return dict(zip(self.values, self.exact))
        return dict(zip(self.values, self.probs))

    def _weights(self):
        return self.exact if self.exact is not None else self.probs

    def mean(self) -> Number:
        w = self._weights()
        if self.exact is not None:
            return sum(v * p for v, p in zip(self.values, w))
        return math.fsum(v * p for v, p in zip(self.values, w))

    def variance(self) -> Number:
        mu = self.mean()
        w = self._weights()
        if self.exact is not None:
            return sum((v - mu) ** 2 * p for v, p in zip(self.values, w))
        return math.fsum((v - mu) ** 2 * p for v, p in zip(self.values, w))

    def pgf(self, s):
        """``E s^X``; exact when both the pmf and ``s`` are rational."""
        if self.exact is not None and isinstance(s, (int, Fraction)):
            return sum(p * Fraction(s) ** v for v, p in zip(self.values, self.exact))
        return sum(p * s**v for v, p in zip(self.values, self.probs))

    def cdf(self) -> np.ndarray:
        return np.cumsum(np.asarray(self.probs))


# ---------------------------------------------------------------------------
# Random streams


@dataclass(eq=False)
class RandomStream:
    """Deterministic stream keyed by ``(seed, stream)``.

    Child streams from :meth:`spawn` are independent of the parent and of
    each other; identical keys reproduce identical draws.
    """

    seed: int
    stream: int = 0
    path: tuple = ()
    generator: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        for name, v in (("seed", self.seed), ("stream", self.stream)):
            if not (0 <= int(v) < 2**64):
                raise ConfigurationError(f"{name} must be an unsigned 64-bit integer")
        ss = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream),) + tuple(self.path))
        self.generator = np.random.Generator(np.random.PCG64(ss))

    def spawn(self, index: int) -> "RandomStream":
        return RandomStream(self.seed, self.stream, self.path + (int(index),))

    def random(self, size=None):
        return self.generator.random(size)

    def integers(self, low, high, size=None):
        return self.generator.integers(low, high, size)


DEFAULT_CHUNK = 1 << 16


def sample_in_chunks(
    sampler: Callable[[RandomStream, int], np.ndarray],
    size: int,
    rng: RandomStream,
    threads: int = 1,
    chunk: int = DEFAULT_CHUNK,
) -> np.ndarray:
    """Run ``sampler(child_stream, m)`` over fixed-size chunks and concatenate.

    Chunk ``i`` always uses ``rng.spawn(i)``, so the result does not depend on
    ``threads``.
    """
    sizes = [chunk] * (size // chunk)
    if size % chunk:
        sizes.append(size % chunk)
    jobs = [(rng.spawn(i), m) for i, m in enumerate(sizes)]
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda job: sampler(*job), jobs))
    else:
        parts = [sampler(*job) for job in jobs]
    if not parts:
        return np.empty(0)
    return np.concatenate(parts, axis=0)


# ---------------------------------------------------------------------------
# Trajectories


@dataclass(frozen=True, eq=False)
class ClockTrajectory:
    """Realised ``T_1..T_n`` with the reversion indices ``U(1)..U(n-1)``.

    For occasional laws ``reversions`` holds ``V(k)`` and ``gates`` the
    Bernoulli(q) draws ``I_k``.
    """

    values: np.ndarray
    reversions: np.ndarray
    law: ReversionLaw = UNIFORM
    gates: np.ndarray | None = None

    @property
    def n(self) -> int:
        return len(self.values)

    def check(self) -> None:
        T, U = np.asarray(self.values), np.asarray(self.reversions)
        if T[0] != 0:
            raise InvariantError("T_1 must be 0")
        if len(U) != len(T) - 1:
            raise InvariantError("need exactly n-1 reversion indices")
        k = np.arange(1, len(T))
        if np.any(U < 1) or np.any(U > k):
            raise InvariantError("reversion(k) must lie in {1..k}")
        if np.any(T[1:] != 1 + T[U - 1]):
            raise InvariantError("T_{k+1} != 1 + T_{reversion(k)}")
        if self.gates is not None and np.any((np.asarray(self.gates) == 0) & (U != k)):
            raise InvariantError("ungated step must have V(k) = k")

