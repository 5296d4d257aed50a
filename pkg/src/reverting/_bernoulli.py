"""Sums of independent Bernoulli variables: pmf, moments, Lyapunov sums."""
from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from .core import MASS_TOLERANCE, InvariantError, Pmf

TAIL_SIGMAS = 12


def exact_pmf(probs) -> Pmf:
    """Pmf of ``sum Z_k`` by multiplying the factors ``q_k + p_k s`` exactly."""
    coef = [Fraction(1)]
    for p in probs:
        q = 1 - p
        nxt = [c * q for c in coef] + [Fraction(0)]
        for i, c in enumerate(coef):
            nxt[i + 1] += c * p
        coef = nxt
    return Pmf.from_exact(dict(enumerate(coef)))


def float_pmf(probs: np.ndarray, tail_tolerance: float = 0.0) -> Pmf:
    """Floating-point pmf with support capped at mean + 12 sd.

    The cap is widened until the mass pushed past it is below 1e-12.
    Coefficients under ``tail_tolerance`` are then dropped and reported.
    """
    probs = np.asarray(probs, dtype=float)
    m = math.fsum(probs)
    v = math.fsum(probs * (1 - probs))
    cap = min(len(probs), int(math.ceil(m + TAIL_SIGMAS * math.sqrt(v))) + 1)
    while True:
        coef, overflow = _capped_product(probs, cap)
        if overflow < MASS_TOLERANCE or cap >= len(probs):
            break
        cap = min(len(probs), 2 * cap)
    if overflow >= MASS_TOLERANCE:
        raise InvariantError(f"truncated mass {overflow!r} exceeds tolerance")
    dropped = overflow
    if tail_tolerance > 0:
        small = coef < tail_tolerance
        dropped += math.fsum(coef[small])
        coef = np.where(small, 0.0, coef)
    return Pmf.from_floats(np.arange(len(coef)), coef, dropped_mass=dropped)


def _capped_product(probs: np.ndarray, cap: int):
    coef = np.zeros(cap + 1)
    coef[0] = 1.0
    overflow = 0.0
    top = 0
    for p in probs.tolist():
        q = 1.0 - p
        if top == cap:
            overflow += coef[cap] * p
            coef[1:] = coef[1:] * q + coef[:-1] * p
        else:
            top += 1
            coef[1 : top + 1] = coef[1 : top + 1] * q + coef[:top] * p
        coef[0] *= q
    return coef, overflow


def moments(probs, exact: bool = False):
    """(mean, variance) of the Bernoulli sum."""
    if exact:
        return sum(probs, Fraction(0)), sum((p * (1 - p) for p in probs), Fraction(0))
    probs = np.asarray(probs, dtype=float)
    return math.fsum(probs), math.fsum(probs * (1 - probs))


def lyapunov_terms(probs, exact: bool = False):
    """``E|Z - p|^3 = p q (p^2 + q^2)`` for each factor."""
    if exact:
        return [p * (1 - p) * (p * p + (1 - p) ** 2) for p in probs]
    p = np.asarray(probs, dtype=float)
    q = 1 - p
    return p * q * (p * p + q * q)
