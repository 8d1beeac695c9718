"""Seeded weight streams for the test distributions.

Every distribution is driven by uniform draws on (0, 1] from the same
generator, so streams for different power-law exponents built from one
(seed, index) pair share their underlying ``x`` sequence point for point.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

GENERATOR_ID = f"numpy-{np.__version__}/PCG64/SeedSequence(seed,spawn_key=(index,))"


class ConfigError(ValueError):
    """Invalid distribution spec or parameters."""


@dataclass(frozen=True)
class DistributionSpec:
    """One of ``uniform``, ``power`` (with ``alpha``), ``exp`` or ``expint``."""

    variant: str
    alpha: float = 0.0

    def __post_init__(self):
        if self.variant not in ("uniform", "power", "exp", "expint"):
            raise ConfigError(f"unknown distribution {self.variant!r}")
        if self.variant == "power" and not -1.0 < self.alpha <= 0.0:
            raise ConfigError(f"power exponent must lie in (-1, 0], got {self.alpha}")

    @property
    def draws_per_weight(self) -> int:
        return 2 if self.variant == "expint" else 1

    def __str__(self) -> str:
        if self.variant == "power":
            return f"power:{self.alpha!r}"
        return self.variant


def Uniform01() -> DistributionSpec:
    return DistributionSpec("uniform")


def PowerIntegrand(alpha: float) -> DistributionSpec:
    return DistributionSpec("power", float(alpha))


def Exponential() -> DistributionSpec:
    return DistributionSpec("exp")


def ExpIntegral() -> DistributionSpec:
    return DistributionSpec("expint")


def parse_spec(text: str) -> DistributionSpec:
    """Parse ``uniform``, ``power:<alpha>``, ``exp`` or ``expint``."""
    name, sep, arg = text.strip().partition(":")
    if name == "power":
        if not sep:
            raise ConfigError("power needs an exponent, e.g. power:-0.3")
        try:
            alpha = float(arg)
        except ValueError:
            raise ConfigError(f"bad power exponent {arg!r}") from None
        if not math.isfinite(alpha):
            raise ConfigError(f"bad power exponent {arg!r}")
        return PowerIntegrand(alpha)
    if sep:
        raise ConfigError(f"{name!r} takes no parameter")
    return DistributionSpec(name)


class SeededStream:
    """Reproducible random source keyed by ``(seed, index)``.

    The index is used as the SeedSequence spawn key, so streams with
    different indices are statistically independent.
    """

    def __init__(self, seed: int, index: int = 0):
        self.seed = int(seed)
        self.index = int(index)
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.index,))
        self.rng = np.random.Generator(np.random.PCG64(ss))

    def uniform(self, size=None):
        """Uniform draws on (0, 1]; exact zero never occurs."""
        return 1.0 - self.rng.random(size)


def weights_from_uniform(spec: DistributionSpec, x):
    """Map uniform (0, 1] draws to weights.

    ``x`` has a trailing axis of length ``spec.draws_per_weight``.
    """
    x = np.asarray(x, dtype=np.float64)
    if spec.variant == "uniform":
        return x[..., 0]
    if spec.variant == "power":
        if spec.alpha == 0.0:
            return np.ones_like(x[..., 0])
        return (1.0 + spec.alpha) * x[..., 0] ** spec.alpha
    if spec.variant == "exp":
        return -np.log(x[..., 0])
    # product of a uniform and a unit exponential has density E1(w)
    return x[..., 0] * -np.log(x[..., 1])


def draw(spec: DistributionSpec, stream: SeededStream, size) -> np.ndarray:
    """Weights of the given shape; consumes ``spec.draws_per_weight`` uniforms each."""
    shape = (size,) if isinstance(size, int) else tuple(size)
    x = stream.uniform(shape + (spec.draws_per_weight,))
    return weights_from_uniform(spec, x)


def sample(spec: DistributionSpec, stream: SeededStream) -> float:
    return float(draw(spec, stream, 1)[0])


def analytic_moment(spec: DistributionSpec, p: int) -> Fraction | float | None:
    """``E[w**p]`` for p = 1..4, or ``None`` when the integral diverges."""
    if p not in (1, 2, 3, 4):
        raise ConfigError(f"moment order must be 1..4, got {p}")
    if spec.variant == "uniform":
        return Fraction(1, p + 1)
    if spec.variant == "exp":
        return Fraction(math.factorial(p))
    if spec.variant == "expint":
        return Fraction(math.factorial(p), p + 1)
    a = spec.alpha
    if p * a <= -1.0:
        return None
    return (1.0 + a) ** p / (p * a + 1.0)


def analytic_moments(spec: DistributionSpec) -> list:
    return [analytic_moment(spec, p) for p in (1, 2, 3, 4)]
