"""Integral, first-order and second-order error estimators.

The sum-based functions take a :class:`~mcerr.moment_core.PowerSums` and use
only integer constants, so feeding them rational sums gives exact answers.
:func:`report` is the production path and reads the numerically stable
:class:`~mcerr.moment_core.CentralAccumulator` instead.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction

from .moment_core import CentralAccumulator, PowerSums, clamped


class UndefinedEstimateError(ValueError):
    """The stream is too short for the requested estimator."""


def falling_power(n: int, k: int) -> int:
    """``n (n-1) ... (n-k+1)``; zero when ``k > n``."""
    out = 1
    for i in range(k):
        out *= n - i
    return out


def _need(sums, k: int, what: str) -> int:
    if sums.n < k:
        raise UndefinedEstimateError(f"{what} needs at least {k} points, got {sums.n}")
    return sums.n


def e1(sums: PowerSums):
    n = _need(sums, 1, "e1")
    return sums.s1 / n


def sigma2(sums: PowerSums):
    n = _need(sums, 1, "sigma2")
    return n * sums.s2 - sums.s1 * sums.s1


def sigma4(sums: PowerSums):
    n = _need(sums, 1, "sigma4")
    return n * sums.s4 - 4 * sums.s3 * sums.s1 + 3 * sums.s2 * sums.s2


def e2(sums: PowerSums):
    """Unbiased estimate of the variance of :func:`e1`."""
    n = _need(sums, 2, "e2")
    return sigma2(sums) / (falling_power(n, 2) * n)


def _e4_from_sigmas(n: int, s2, s4):
    f2 = falling_power(n, 2)
    f4 = falling_power(n, 4)
    return (f2 * s4 - 4 * s2 * s2) / (f4 * n**3) + 2 * s2 * s2 / (f4 * f2 * n * n)


def _e4_hat_from_sigmas(n: int, s2, s4):
    return (n * n * s4 - 4 * s2 * s2) / (falling_power(n, 4) * n**3)


def e4_unbiased(sums: PowerSums):
    """Unbiased estimate of the variance of :func:`e2`. Can come out negative."""
    n = _need(sums, 4, "e4_unbiased")
    return _e4_from_sigmas(n, sigma2(sums), sigma4(sums))


def e4_hat(sums: PowerSums):
    """Nonnegative second-order estimate, biased at relative order 1/n."""
    n = _need(sums, 4, "e4_hat")
    return _e4_hat_from_sigmas(n, sigma2(sums), sigma4(sums))


# -- accumulator read-out ----------------------------------------------------

def acc_e1(acc: CentralAccumulator):
    _need(acc, 1, "e1")
    return acc.m


def acc_e2(acc: CentralAccumulator):
    n = _need(acc, 2, "e2")
    return n * clamped(acc).p / falling_power(n, 2)


def acc_e4_hat(acc: CentralAccumulator):
    n = _need(acc, 4, "e4_hat")
    return n * clamped(acc).r / falling_power(n, 4)


def acc_e4_unbiased(acc: CentralAccumulator):
    # sigma2 = n^2 p and sigma4 = n^2 (r + 4 p^2)
    n = _need(acc, 4, "e4_unbiased")
    c = clamped(acc)
    n2 = n * n
    return _e4_from_sigmas(n, n2 * c.p, n2 * (c.r + 4 * c.p * c.p))


@dataclass
class EstimateReport:
    n: int
    e1: float | None = None
    e2: float | None = None
    e4_unbiased: float | None = None
    e4_hat: float | None = None
    first_order_error: float | None = None
    second_order_error: float | None = None
    flags: list[str] = field(default_factory=list)

    @property
    def complete(self) -> bool:
        return not self.flags

    def as_dict(self) -> dict:
        return asdict(self)


def report(acc: CentralAccumulator) -> EstimateReport:
    """Integral estimate with its first- and second-order errors.

    The first-order error is the square root of ``e2``; the second-order
    error is the fourth root of ``e4_hat``. Anything the stream is too short
    for, or that went non-finite, is left as ``None`` and named in ``flags``.
    """
    out = EstimateReport(n=acc.n)
    values = [acc.m, acc.p, acc.q, acc.r]
    if acc.n > 0 and not all(math.isfinite(float(v)) for v in values):
        out.flags.append("nonfinite")
        return out
    if acc.n < 1:
        out.flags.append("e1_undefined")
    else:
        out.e1 = float(acc_e1(acc)) + 0.0
    if acc.n < 2:
        out.flags.append("e2_undefined")
    else:
        out.e2 = float(acc_e2(acc)) + 0.0
        out.first_order_error = math.sqrt(out.e2) if out.e2 >= 0 else None
    if acc.n < 4:
        out.flags.append("e4_undefined")
    else:
        out.e4_hat = float(acc_e4_hat(acc)) + 0.0
        out.e4_unbiased = float(acc_e4_unbiased(acc)) + 0.0
        out.second_order_error = math.sqrt(math.sqrt(out.e4_hat)) if out.e4_hat >= 0 else None
    if (out.e2 is not None and out.e2 < 0) or (out.e4_hat is not None and out.e4_hat < 0):
        out.flags.append("negative_beyond_rounding")
    return out


# -- closed-form variances -----------------------------------------------------

def analytic_var_e1(j1, j2, n: int):
    return (j2 - j1 * j1) / n


def analytic_var_e2(j1, j2, j3, j4, n: int):
    """Exact variance of ``e2`` for ``n`` iid weights with moments ``j1..j4``."""
    if n < 2:
        raise UndefinedEstimateError("variance of e2 needs n >= 2")
    spread = j2 - j1 * j1
    fourth = j4 - 4 * j3 * j1 + 3 * j2 * j2
    return (fourth - 4 * spread * spread) / n**3 + 2 * spread * spread / (falling_power(n, 2) * n * n)


# -- zero/one weights ------------------------------------------------------------

@dataclass
class Counterexample:
    weights: list[int]
    a: Fraction
    threshold: Fraction
    predicted_negative: bool
    e4: Fraction
    e4_hat: Fraction


def negativity_threshold(n: int) -> Fraction:
    """Smallest ``a = b - b**2`` above which ``e4_unbiased`` of 0/1 weights is negative."""
    return Fraction((n - 1) ** 2, n * (4 * n - 6))


def counterexample(n: int, b: float) -> Counterexample:
    """0/1 weight stream of length ``n`` with a fraction ``b`` of ones.

    The number of ones is ``round(b * n)`` (ties to even); ``a`` is computed
    from the realized mean. Estimates are exact rationals.
    """
    if n < 4:
        raise UndefinedEstimateError("counterexample needs n >= 4")
    if not 0 <= b <= 1:
        raise ValueError(f"b must lie in [0, 1], got {b}")
    ones = round(b * n)
    weights = [1] * ones + [0] * (n - ones)
    mean = Fraction(ones, n)
    a = mean - mean * mean
    threshold = negativity_threshold(n)
    k = Fraction(ones)
    sums = PowerSums(n=n, s1=k, s2=k, s3=k, s4=k)
    return Counterexample(
        weights=weights,
        a=a,
        threshold=threshold,
        predicted_negative=a > threshold,
        e4=e4_unbiased(sums),
        e4_hat=e4_hat(sums),
    )
