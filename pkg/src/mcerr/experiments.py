"""Experiment drivers: convergence traces, replica ensembles, CLT widths and
the large-offset cancellation test.

Replicas are generated in fixed blocks of :data:`REPLICA_BLOCK`; block ``b``
draws from ``SeededStream(seed, b)``. Replica ``i`` therefore depends only on
``(seed, i)``, never on the total replica count or on how many workers ran.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import IO, Sequence

import numpy as np
from scipy import stats
from scipy.special import ndtr

from . import __version__
from .estimators import (
    acc_e2,
    acc_e4_hat,
    acc_e4_unbiased,
    analytic_var_e1,
    analytic_var_e2,
    e2 as sums_e2,
    e4_hat as sums_e4_hat,
)
from .moment_core import acc_from_array, acc_update, CentralAccumulator, clamped, sums_update, PowerSums
from .oracle import exact_estimates
from .sampling import GENERATOR_ID, DistributionSpec, SeededStream, draw

REPLICA_BLOCK = 4096
DRAW_CHUNK = 65536

TRACE_HEADER = "n,e1,e2,e4hat,err1,err2"
HISTOGRAM_HEADER = "bin_lo,bin_hi,count,density,overlay"


def metadata_line(**fields) -> str:
    parts = [f"mcerr={__version__}", f"generator={GENERATOR_ID}"]
    parts += [f"{k}={v}" for k, v in fields.items()]
    return "# " + " ".join(parts)


def _g12(x: float) -> str:
    return format(x, ".12g")


# -- convergence traces ----------------------------------------------------------


@dataclass
class ConvergenceTrace:
    spec: DistributionSpec
    seed: int
    stride: int
    n: np.ndarray
    e1: np.ndarray
    e2: np.ndarray
    e4hat: np.ndarray

    @property
    def err1(self) -> np.ndarray:
        return np.sqrt(self.e2)

    @property
    def err2(self) -> np.ndarray:
        return np.sqrt(np.sqrt(self.e4hat))

    def at(self, n: int) -> int:
        """Row index of the row recorded at ``n`` points."""
        (idx,) = np.nonzero(self.n == n)
        if not len(idx):
            raise KeyError(f"no trace row at n={n}")
        return int(idx[0])

    def write_csv(self, fh: IO[str]) -> None:
        fh.write(metadata_line(kind="trace", spec=self.spec, seed=self.seed, stride=self.stride) + "\n")
        fh.write(TRACE_HEADER + "\n")
        for row in zip(self.n, self.e1, self.e2, self.e4hat, self.err1, self.err2):
            fh.write(str(int(row[0])) + "," + ",".join(_g12(float(v)) for v in row[1:]) + "\n")


def stream_weights(spec: DistributionSpec, n: int, seed: int, index: int = 0):
    """Yield ``n`` weights one at a time, drawn in chunks."""
    stream = SeededStream(seed, index)
    left = n
    while left > 0:
        chunk = min(left, DRAW_CHUNK)
        yield from draw(spec, stream, chunk).tolist()
        left -= chunk


def run_convergence(spec: DistributionSpec, n_max: int, seed: int, stride: int = 10) -> ConvergenceTrace:
    """Stream ``n_max`` weights through one accumulator and record every ``stride`` points.

    Rows start at the first multiple of ``stride`` with at least four points,
    and the final point count is always recorded.
    """
    if n_max < 4:
        raise ValueError("n_max must be at least 4")
    if stride < 1:
        raise ValueError("stride must be positive")
    rows = []
    acc = CentralAccumulator()
    for w in stream_weights(spec, n_max, seed):
        acc = acc_update(acc, w)
        if acc.n >= 4 and (acc.n % stride == 0 or acc.n == n_max):
            c = clamped(acc)
            rows.append((acc.n, c.m, acc_e2(c), acc_e4_hat(c)))
    arr = np.array(rows, dtype=np.float64)
    return ConvergenceTrace(
        spec=spec,
        seed=seed,
        stride=stride,
        n=arr[:, 0].astype(np.int64),
        e1=arr[:, 1],
        e2=arr[:, 2],
        e4hat=arr[:, 3],
    )


def loglog_slope(n, y, lo: float | None = None) -> float:
    """Least-squares slope of log(y) against log(n) for ``n >= lo``.

    ``lo`` defaults to one decade below the largest ``n``.
    """
    n = np.asarray(n, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if lo is None:
        lo = n.max() / 10.0
    keep = (n >= lo) & (y > 0)
    slope, _ = np.polyfit(np.log(n[keep]), np.log(y[keep]), 1)
    return float(slope)


def record_arrivals(weights: Sequence[float]) -> list[int]:
    """Point counts ``n`` at which a new running-maximum weight arrived."""
    out = []
    best = -math.inf
    for i, w in enumerate(weights, start=1):
        if w > best:
            best = w
            out.append(i)
    return out


def find_jumps(n, values, factor: float = 1.5) -> list[int]:
    """Row positions ``n`` where ``values`` rose by more than ``factor`` since the previous row."""
    n = np.asarray(n)
    v = np.asarray(values, dtype=np.float64)
    up = v[1:] > factor * v[:-1]
    return [int(x) for x in n[1:][up]]


@dataclass
class ConvergenceStudy:
    spec: DistributionSpec
    seeds: list[int]
    slopes_e2: list[float]
    slopes_e4hat: list[float]
    ratio_low: float
    ratio_high: float

    @property
    def ratio(self) -> float:
        """Mean relative second-order error at the high point over the low point."""
        return self.ratio_high / self.ratio_low


def run_convergence_study(
    spec: DistributionSpec, n_max: int, seeds: Sequence[int], stride: int = 10, n_low: int = 100
) -> ConvergenceStudy:
    slopes2, slopes4, low, high = [], [], [], []
    for seed in seeds:
        tr = run_convergence(spec, n_max, seed, stride)
        slopes2.append(loglog_slope(tr.n, tr.e2))
        slopes4.append(loglog_slope(tr.n, tr.e4hat))
        rel = tr.err2 / tr.err1
        low.append(rel[tr.at(n_low)])
        high.append(rel[tr.at(n_max)])
    return ConvergenceStudy(
        spec=spec,
        seeds=list(seeds),
        slopes_e2=slopes2,
        slopes_e4hat=slopes4,
        ratio_low=float(np.mean(low)),
        ratio_high=float(np.mean(high)),
    )


# -- ensembles ---------------------------------------------------------------------


@dataclass
class Histogram:
    lo: float
    hi: float
    counts: np.ndarray
    density: np.ndarray
    overlay: np.ndarray
    out_of_range: int

    @property
    def bin_count(self) -> int:
        return len(self.counts)

    @property
    def edges(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.bin_count + 1)

    def __add__(self, other: "Histogram") -> "Histogram":
        if (self.lo, self.hi, self.bin_count) != (other.lo, other.hi, other.bin_count):
            raise ValueError("histograms with different binning cannot be added")
        counts = self.counts + other.counts
        total = counts.sum() + self.out_of_range + other.out_of_range
        width = (self.hi - self.lo) / self.bin_count
        return Histogram(self.lo, self.hi, counts, counts / (total * width), self.overlay,
                         self.out_of_range + other.out_of_range)

    def write_csv(self, fh: IO[str], **meta) -> None:
        fh.write(metadata_line(kind="histogram", **meta) + "\n")
        fh.write(HISTOGRAM_HEADER + "\n")
        edges = self.edges
        for i in range(self.bin_count):
            fh.write(",".join([
                _g12(edges[i]), _g12(edges[i + 1]), str(int(self.counts[i])),
                _g12(self.density[i]), _g12(self.overlay[i]),
            ]) + "\n")


def make_histogram(values, center: float, width: float, bins: int = 100, span: float = 5.0) -> Histogram:
    """Histogram over sample mean +- ``span`` sample standard deviations, with
    a Gaussian of the given center and width averaged over each bin."""
    values = np.asarray(values, dtype=np.float64)
    mean = float(values.mean())
    sd = float(values.std())
    half = span * sd if sd > 0 else 0.5
    lo, hi = mean - half, mean + half
    counts, edges = np.histogram(values, bins=bins, range=(lo, hi))
    bw = (hi - lo) / bins
    density = counts / (len(values) * bw)
    if width > 0:
        overlay = np.diff(ndtr((edges - center) / width)) / bw
    else:
        overlay = np.zeros(bins)
    return Histogram(lo, hi, counts, density, overlay, int(len(values) - counts.sum()))


def ks_distance(z) -> float:
    """Kolmogorov-Smirnov distance of a sample from the standard normal."""
    return float(stats.kstest(np.asarray(z, dtype=np.float64), "norm").statistic)


@dataclass
class EnsembleResult:
    spec: DistributionSpec
    n: int
    replicas: int
    seed: int
    e1: np.ndarray
    e2: np.ndarray
    e4: np.ndarray
    e4hat: np.ndarray
    mean_square: np.ndarray
    hist_e1: Histogram = field(repr=False)
    hist_e2: Histogram = field(repr=False)
    overlay_e1: tuple[float, float] = (0.0, 0.0)
    overlay_e2: tuple[float, float] = (0.0, 0.0)
    ks_e1: float = math.nan
    ks_e2: float = math.nan

    def mean(self, name: str) -> float:
        return float(getattr(self, name).mean())

    def stderr(self, name: str) -> float:
        v = getattr(self, name)
        return float(v.std(ddof=1) / math.sqrt(len(v)))

    def variance(self, name: str) -> float:
        return float(getattr(self, name).var(ddof=1))

    def variance_stderr(self, name: str) -> float:
        """Standard error of :meth:`variance` from the sample fourth central moment."""
        v = getattr(self, name)
        c = v - v.mean()
        m2 = float(np.mean(c * c))
        m4 = float(np.mean(c**4))
        return math.sqrt(max(m4 - m2 * m2, 0.0) / len(v))

    def summary(self) -> dict:
        out = {
            "spec": str(self.spec),
            "n": self.n,
            "replicas": self.replicas,
            "seed": self.seed,
            "generator": GENERATOR_ID,
        }
        for name in ("e1", "e2", "e4", "e4hat", "mean_square"):
            out[name] = {"mean": self.mean(name), "stderr": self.stderr(name), "variance": self.variance(name)}
        out["overlay_e1"] = {"center": self.overlay_e1[0], "width": self.overlay_e1[1]}
        out["overlay_e2"] = {"center": self.overlay_e2[0], "width": self.overlay_e2[1]}
        out["ks_e1"] = self.ks_e1
        out["ks_e2"] = self.ks_e2
        out["out_of_range"] = {"e1": self.hist_e1.out_of_range, "e2": self.hist_e2.out_of_range}
        return out


def _ensemble_block(spec: DistributionSpec, n: int, seed: int, block: int, size: int):
    w = draw(spec, SeededStream(seed, block), (size, n))
    acc = clamped(acc_from_array(w))
    return (acc.m, acc_e2(acc), acc_e4_unbiased(acc), acc_e4_hat(acc), np.mean(w * w, axis=1))


def run_ensemble(
    spec: DistributionSpec,
    n: int,
    replicas: int,
    seed: int,
    bin_count: int = 100,
    workers: int = 1,
) -> EnsembleResult:
    """E1, E2, E4 and E4-hat for ``replicas`` independent streams of ``n`` weights.

    The E1 histogram is overlaid with a Gaussian of width ``sqrt(mean(E2))``
    and the E2 histogram with width ``sqrt(mean(E4hat))``; the KS distances
    use the same centers and widths to standardize.
    """
    if n < 4:
        raise ValueError("ensemble streams need n >= 4")
    if replicas < 100:
        raise ValueError("ensembles need at least 100 replicas")
    jobs = []
    start = 0
    while start < replicas:
        size = min(REPLICA_BLOCK, replicas - start)
        jobs.append((len(jobs), size))
        start += size

    def work(job):
        return _ensemble_block(spec, n, seed, *job)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(work, jobs))
    else:
        parts = [work(job) for job in jobs]
    e1, e2, e4, e4hat, ms = (np.concatenate(col) for col in zip(*parts))

    c1, w1 = float(e1.mean()), math.sqrt(float(e2.mean()))
    c2, w2 = float(e2.mean()), math.sqrt(float(e4hat.mean()))
    res = EnsembleResult(
        spec=spec, n=n, replicas=replicas, seed=seed,
        e1=e1, e2=e2, e4=e4, e4hat=e4hat, mean_square=ms,
        hist_e1=make_histogram(e1, c1, w1, bin_count),
        hist_e2=make_histogram(e2, c2, w2, bin_count),
        overlay_e1=(c1, w1),
        overlay_e2=(c2, w2),
    )
    if w1 > 0:
        res.ks_e1 = ks_distance((e1 - c1) / w1)
    if w2 > 0:
        res.ks_e2 = ks_distance((e2 - c2) / w2)
    return res


def ensemble_targets(moments: Sequence, n: int) -> dict[str, float | None]:
    """Expected ensemble means of E1, E2 and E4 from the weight moments ``J1..J4``."""
    j1, j2, j3, j4 = moments
    return {
        "e1": None if j1 is None else float(j1),
        "e2": None if None in (j1, j2) else float(analytic_var_e1(j1, j2, n)),
        "e4": None if None in (j1, j2, j3, j4) else float(analytic_var_e2(j1, j2, j3, j4, n)),
    }


@dataclass
class CltPrediction:
    lambda0: float
    tau0: float
    var_x: float


def clt_prediction(w2_mean, w4_mean, n: int) -> CltPrediction:
    """Center and spread of ``X = mean(w**2)`` over ``n`` points: X has mean
    ``<w^2>`` and variance ``(<w^4> - <w^2>^2) / n``."""
    tau0 = w4_mean - w2_mean * w2_mean
    if tau0 < 0:
        raise ValueError(f"<w^4> - <w^2>^2 = {tau0} is negative; moments are inconsistent")
    return CltPrediction(lambda0=w2_mean, tau0=tau0, var_x=tau0 / n)


# -- cancellation stress test -------------------------------------------------------


@dataclass
class StabilityReport:
    offset: float
    n: int
    seed: int
    oracle: dict[str, float]
    accumulator: dict[str, float]
    naive: dict[str, float]

    def rel_dev(self, path: str, name: str) -> float:
        ref = self.oracle[name]
        got = getattr(self, path)[name]
        return abs(got - ref) / abs(ref)

    def as_dict(self) -> dict:
        return {
            "offset": self.offset,
            "n": self.n,
            "seed": self.seed,
            "generator": GENERATOR_ID,
            "oracle": self.oracle,
            "accumulator": self.accumulator,
            "naive": self.naive,
            "rel_dev": {
                path: {name: self.rel_dev(path, name) for name in ("e2", "e4_hat")}
                for path in ("accumulator", "naive")
            },
        }


def run_stability(offset: float, n: int, seed: int) -> StabilityReport:
    """E2 and E4-hat of ``offset + u`` (u uniform) by naive power sums,
    by the central accumulator and by exact rational arithmetic."""
    if n < 4:
        raise ValueError("stability run needs n >= 4")
    stream = SeededStream(seed, 0)
    weights = (offset + stream.uniform(n)).tolist()
    sums = PowerSums(n=0, s1=0.0, s2=0.0, s3=0.0, s4=0.0)
    acc = CentralAccumulator()
    for w in weights:
        sums = sums_update(sums, w)
        acc = acc_update(acc, w)
    exact = exact_estimates(weights)
    return StabilityReport(
        offset=offset,
        n=n,
        seed=seed,
        oracle={"e2": float(exact["e2"]), "e4_hat": float(exact["e4_hat"])},
        accumulator={"e2": float(acc_e2(acc)), "e4_hat": float(acc_e4_hat(acc))},
        naive={"e2": float(sums_e2(sums)), "e4_hat": float(sums_e4_hat(sums))},
    )
