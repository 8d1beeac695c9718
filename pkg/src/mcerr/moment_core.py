"""Running statistics of a weight stream.

Two representations are kept:

* :class:`PowerSums` holds the raw sums ``S_p = sum(w**p)`` for p = 1..4.
  Cheap and exact for small integer data, but the estimators built from it
  cancel catastrophically once the weights carry a large common offset.
* :class:`CentralAccumulator` holds the running mean ``m`` and the central
  combinations ``p``, ``q``, ``r`` and is updated one point at a time with
  recurrences that never subtract two large numbers.

In terms of the central moments ``c_k = mean((w - m)**k)`` of the stream,
``p = c_2``, ``q = c_3`` and ``r = c_4 - c_2**2``.

All update functions are written with plain arithmetic, so the fields may be
Python floats, :class:`fractions.Fraction` values (exact reference runs) or
numpy arrays (many independent streams advanced in lock step).
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Any, Iterable

import numpy as np

#: Relative size below which a negative ``p`` or ``r`` is treated as rounding.
CLAMP_RTOL = 1e-12


@dataclass(frozen=True)
class PowerSums:
    n: int = 0
    s1: Any = 0
    s2: Any = 0
    s3: Any = 0
    s4: Any = 0


@dataclass(frozen=True)
class CentralAccumulator:
    n: int = 0
    m: Any = 0
    p: Any = 0
    q: Any = 0
    r: Any = 0


def _ratio(num: int, den: int, like):
    # keeps exact runs exact: int / int would otherwise produce a float
    if isinstance(like, Fraction):
        return Fraction(num, den)
    return num / den


def sums_update(sums: PowerSums, w) -> PowerSums:
    w2 = w * w
    return PowerSums(
        n=sums.n + 1,
        s1=sums.s1 + w,
        s2=sums.s2 + w2,
        s3=sums.s3 + w2 * w,
        s4=sums.s4 + w2 * w2,
    )


def sums_from_stream(weights: Iterable, start: PowerSums | None = None) -> PowerSums:
    """Naive sequential power sums, one point at a time."""
    sums = PowerSums() if start is None else start
    for w in weights:
        sums = sums_update(sums, w)
    return sums


def sums_from_array(weights, axis: int = -1) -> PowerSums:
    """Power sums along ``axis`` of an array, one set per remaining index."""
    w = np.asarray(weights, dtype=np.float64)
    w2 = w * w
    return PowerSums(
        n=w.shape[axis],
        s1=w.sum(axis=axis),
        s2=w2.sum(axis=axis),
        s3=(w2 * w).sum(axis=axis),
        s4=(w2 * w2).sum(axis=axis),
    )


def acc_update(acc: CentralAccumulator, w) -> CentralAccumulator:
    """Add one weight to the accumulator.

    The first point is special-cased; afterwards ``u = w - m`` is the
    deviation from the previous mean and M, P, Q, R are advanced with the
    one-point recurrences.
    """
    if acc.n == 0:
        zero = w - w
        return CentralAccumulator(n=1, m=w + zero, p=zero, q=zero, r=zero)
    n = acc.n + 1
    m, p, q = acc.m, acc.p, acc.q
    u = w - m
    u2 = u * u
    shrink = _ratio(n - 1, n, u)
    inner = p - (n - 2) * u2 / n
    return CentralAccumulator(
        n=n,
        m=m + u / n,
        p=shrink * (p + u2 / n),
        q=shrink * (q + (n - 2) * u2 * u / (n * n) - 3 * p * u / n),
        r=shrink * (acc.r + inner * inner / n - 4 * (q * u / n - p * u2 / (n * n))),
    )


def acc_from_stream(weights: Iterable, start: CentralAccumulator | None = None) -> CentralAccumulator:
    acc = CentralAccumulator() if start is None else start
    for w in weights:
        acc = acc_update(acc, w)
    return acc


def acc_from_array(weights, start: CentralAccumulator | None = None) -> CentralAccumulator:
    """Stream the columns of a 2-D array through one accumulator per row.

    Row ``i`` of ``weights`` is an independent stream; the result has array
    fields of length ``weights.shape[0]``.
    """
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim == 1:
        w = w[np.newaxis, :]
    acc = CentralAccumulator() if start is None else start
    for j in range(w.shape[1]):
        acc = acc_update(acc, w[:, j])
    return acc


def acc_merge(a: CentralAccumulator, b: CentralAccumulator) -> CentralAccumulator:
    """Accumulator of the concatenated streams of ``a`` and ``b``.

    Pairwise combination of the central quantities; ``r`` is combined
    directly rather than through ``c_4`` so that no ``c_2**2`` sized terms
    cancel. Adding a single point through this rule reproduces
    :func:`acc_update` term by term.
    """
    if b.n == 0:
        return a
    if a.n == 0:
        return b
    n = a.n + b.n
    d = b.m - a.m
    fa = _ratio(a.n, n, d)
    fb = _ratio(b.n, n, d)
    d2 = d * d
    fab = fa * fb
    dp = a.p - b.p
    return CentralAccumulator(
        n=n,
        m=a.m + fb * d,
        p=fa * a.p + fb * b.p + fab * d2,
        q=fa * a.q + fb * b.q + fab * (d2 * d * (fa - fb) - 3 * d * dp),
        r=fa * a.r
        + fb * b.r
        + fab * (
            dp * dp
            + d2 * d2 * (fa - fb) ** 2
            + d2 * (6 * (fa * b.p + fb * a.p) - 2 * (fa * a.p + fb * b.p))
            + 4 * d * (b.q - a.q)
        ),
    )


def acc_from_sums(sums: PowerSums) -> CentralAccumulator:
    """Evaluate M, P, Q, R from power sums by their defining formulas.

    This is the cancellation-prone route; it serves as the cross-check for
    the recurrences (exactly so when the sums are rational).
    """
    n = sums.n
    if n == 0:
        return CentralAccumulator()
    s1, s2, s3, s4 = sums.s1, sums.s2, sums.s3, sums.s4
    p = s2 / n - s1 * s1 / (n * n)
    return CentralAccumulator(
        n=n,
        m=s1 / n,
        p=p,
        q=s3 / n - 3 * s2 * s1 / (n * n) + 2 * s1**3 / n**3,
        r=s4 / n - 4 * s3 * s1 / (n * n) + 3 * s2 * s2 / (n * n) - 4 * p * p,
    )


def _clamp(value, scale):
    if isinstance(value, np.ndarray) or isinstance(scale, np.ndarray):
        value = np.asarray(value)
        tiny = (value < 0) & (value >= -CLAMP_RTOL * np.asarray(scale))
        return np.where(tiny, 0.0, value)
    if value < 0 and value >= -CLAMP_RTOL * scale:
        return value - value
    return value


def clamped(acc: CentralAccumulator) -> CentralAccumulator:
    """Read-out copy with rounding-sized negative ``p`` and ``r`` set to zero.

    Larger negatives are left alone so that a genuine defect stays visible.
    """
    m2 = acc.m * acc.m
    p = _clamp(acc.p, m2 + abs(acc.p))
    r = _clamp(acc.r, (m2 + abs(p)) ** 2)
    return replace(acc, p=p, r=r)
