"""Slow reference computations used to check the fast paths.

Nothing here is meant for production streams. Multiple sums are enumerated
by brute force over ordered tuples of distinct indices, and power sums are
accumulated in exact integer arithmetic so that the cancellation-heavy
estimator formulas can be evaluated without rounding.
"""
from __future__ import annotations

import math
from fractions import Fraction
from itertools import permutations
from typing import Sequence

import numpy as np

from . import estimators
from .moment_core import PowerSums

#: Largest stream length accepted by :func:`multiple_sum` for each tuple size.
MAX_BRUTE_N = {1: 100_000, 2: 200, 3: 50, 4: 20}


def _check_index(powers: Sequence[int]) -> tuple[int, ...]:
    powers = tuple(int(p) for p in powers)
    if not 1 <= len(powers) <= 4:
        raise ValueError(f"multiple sums of 1 to 4 factors are supported, got {len(powers)}")
    if any(p < 1 for p in powers):
        raise ValueError(f"powers must be positive integers, got {powers}")
    return powers


def _exact(w):
    if isinstance(w, (int, Fraction)):
        return w
    if isinstance(w, np.integer):
        return int(w)
    w = float(w)
    if not math.isfinite(w):
        raise ValueError(f"non-finite weight {w!r}")
    return Fraction(w)


def multiple_sum(weights, powers: Sequence[int]):
    """Sum of ``w[j1]**p1 * ... * w[jk]**pk`` over distinct ``j1, ..., jk``.

    A plain sequence is summed exactly (integers stay integers, floats are
    converted to fractions). A 2-D numpy array is treated as one stream per
    row and summed in floating point, returning one value per row.
    """
    powers = _check_index(powers)
    k = len(powers)
    if isinstance(weights, np.ndarray) and weights.ndim == 2:
        n = weights.shape[1]
        _check_cost(n, k)
        cols = [{p: weights[:, j] ** p for p in set(powers)} for j in range(n)]
        total = np.zeros(weights.shape[0])
        for tup in permutations(range(n), k):
            term = cols[tup[0]][powers[0]]
            for j, p in zip(tup[1:], powers[1:]):
                term = term * cols[j][p]
            total += term
        return total
    ws = [_exact(w) for w in weights]
    _check_cost(len(ws), k)
    total = 0
    for tup in permutations(range(len(ws)), k):
        total += math.prod(ws[j] ** p for j, p in zip(tup, powers))
    return total


def _check_cost(n: int, k: int) -> None:
    if n > MAX_BRUTE_N[k]:
        raise ValueError(f"brute-force sum over {k}-tuples refused for n={n} (limit {MAX_BRUTE_N[k]})")


def verify_product_rule(weights, powers: Sequence[int], q: int) -> bool:
    """Check ``S_P * S_q`` against its expansion into multiple sums.

    Multiplying by a simple sum either lands the extra index on one of the
    existing ones (raising that power by ``q``) or on a new, distinct index.
    Exact comparison for integer weights, 1e-12 relative otherwise.
    """
    powers = _check_index(powers)
    if len(powers) > 3:
        raise ValueError("the expanded side needs k + 1 <= 4 factors")
    lhs = multiple_sum(weights, powers) * multiple_sum(weights, (q,))
    rhs = multiple_sum(weights, powers + (q,))
    for i in range(len(powers)):
        bumped = powers[:i] + (powers[i] + q,) + powers[i + 1:]
        rhs += multiple_sum(weights, bumped)
    if isinstance(lhs, np.ndarray):
        return bool(np.allclose(lhs, rhs, rtol=1e-12, atol=0.0))
    return lhs == rhs


def exact_sums(weights) -> PowerSums:
    """Power sums as exact fractions.

    Every finite float is a dyadic rational, so the stream is rescaled onto a
    common integer grid and summed with Python integers.
    """
    ws = [_exact(w) for w in weights]
    if not ws:
        return PowerSums(n=0, s1=Fraction(0), s2=Fraction(0), s3=Fraction(0), s4=Fraction(0))
    scale = math.lcm(*(Fraction(w).denominator for w in ws))
    ints = [int(w * scale) for w in ws]
    s = [0, 0, 0, 0]
    for x in ints:
        x2 = x * x
        s[0] += x
        s[1] += x2
        s[2] += x2 * x
        s[3] += x2 * x2
    return PowerSums(
        n=len(ints),
        s1=Fraction(s[0], scale),
        s2=Fraction(s[1], scale**2),
        s3=Fraction(s[2], scale**3),
        s4=Fraction(s[3], scale**4),
    )


def compensated_sums(weights) -> PowerSums:
    """Power sums correctly rounded to float64 from the exact values."""
    ex = exact_sums(weights)
    return PowerSums(n=ex.n, s1=float(ex.s1), s2=float(ex.s2), s3=float(ex.s3), s4=float(ex.s4))


def exact_estimates(weights) -> dict[str, Fraction | None]:
    """E1, E2, E4 and E4-hat of a stream in exact rational arithmetic."""
    sums = exact_sums(weights)
    n = sums.n
    return {
        "e1": estimators.e1(sums) if n >= 1 else None,
        "e2": estimators.e2(sums) if n >= 2 else None,
        "e4": estimators.e4_unbiased(sums) if n >= 4 else None,
        "e4_hat": estimators.e4_hat(sums) if n >= 4 else None,
    }


def e2_middle_form(weights):
    """``S_2/N^2 - S_{1,1}/(N(N-1) N)``, built from the brute-force pair sum."""
    n = len(weights)
    if n < 2:
        raise estimators.UndefinedEstimateError("e2 needs at least 2 points")
    s2 = multiple_sum(weights, (2,))
    s11 = multiple_sum(weights, (1, 1))
    return Fraction(s2, n * n) - Fraction(s11, estimators.falling_power(n, 2) * n)
