"""Gaussian-kernel machinery and the Hilbert-Schmidt Independence Criterion.

The biased HSIC estimator (1/n^2) tr(K H L H) with H = I - (1/n) 11' is the
backbone of both the exclusion-restriction independence test and the
DirectLiNGAM root search. Gram matrices are materialized densely, which caps
usable sample sizes (see MAX_DENSE_N); the hot path shares one pairwise
squared-distance buffer between the bandwidth median and the kernel, and all
elementwise transcendentals run on raveled views (the SIMD fast path).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import (
    DegenerateInput,
    LengthMismatch,
    NotSupported,
    RandomSource,
    TooFewObservations,
)

MAX_DENSE_N = 6000
MEDIAN_SUBSAMPLE_N = 2000
MAX_EXHAUSTIVE_N = 8

_FLAT_TRIU_CACHE: dict[int, np.ndarray] = {}


def _flat_triu(n: int) -> np.ndarray:
    """Flat indices of the strict upper triangle of an (n, n) matrix."""
    if n not in _FLAT_TRIU_CACHE:
        rows, cols = np.triu_indices(n, k=1)
        _FLAT_TRIU_CACHE[n] = rows * n + cols
    return _FLAT_TRIU_CACHE[n]


@dataclass(frozen=True)
class KernelSpec:
    """Gaussian kernel; bandwidth None means the median heuristic."""

    kind: str = "Gaussian"
    bandwidth: Optional[float] = None

    def __post_init__(self):
        if self.kind != "Gaussian":
            raise NotSupported(f"kernel kind {self.kind!r} not supported")
        if self.bandwidth is not None and not self.bandwidth > 0:
            raise DegenerateInput("explicit bandwidth must be positive")


MEDIAN_HEURISTIC = KernelSpec()


@dataclass(frozen=True)
class HsicResult:
    statistic: float
    permutation_p: float
    permutations_used: int
    bandwidths: tuple[float, float]


def _median_abs_from_squared(cond: np.ndarray) -> float:
    """Median of |d| given the condensed squared differences d^2.

    Order statistics commute with sqrt, so only the one or two middle squared
    values are rooted. Falls back to the strictly positive differences when
    ties drive the plain median to zero (binary columns); raises only when
    every pairwise difference vanishes. Partitions ``cond`` in place (callers
    pass freshly gathered buffers).
    """
    m = cond.size
    k = (m - 1) // 2
    cond.partition(k)
    lo = float(cond[k])
    if m % 2 == 1:
        med = math.sqrt(lo)
    else:
        hi = float(cond[k + 1 :].min())
        med = 0.5 * (math.sqrt(lo) + math.sqrt(hi))
    if med <= 0.0:
        positive = cond[cond > 0.0]
        if positive.size == 0:
            raise DegenerateInput("all values identical; bandwidth undefined")
        return _median_abs_from_squared(positive)
    return med


def _strided_subsample(x: np.ndarray) -> np.ndarray:
    if x.size <= MEDIAN_SUBSAMPLE_N:
        return x
    idx = np.arange(MEDIAN_SUBSAMPLE_N) * x.size // MEDIAN_SUBSAMPLE_N
    return x[idx]


def median_heuristic(x: np.ndarray) -> float:
    """Median of pairwise absolute differences, used as Gaussian bandwidth.

    Above MEDIAN_SUBSAMPLE_N points an evenly-strided subsample keeps the
    pair enumeration bounded.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.size < 2:
        raise TooFewObservations("median heuristic needs at least 2 points")
    xs = _strided_subsample(x)
    d = xs[:, None] - xs[None, :]
    sq = d.ravel()
    sq *= sq
    return _median_abs_from_squared(np.take(sq, _flat_triu(xs.size)))


def gaussian_gram(x: np.ndarray, bandwidth: float) -> np.ndarray:
    """K_ij = exp(-(x_i - x_j)^2 / (2 bandwidth^2))."""
    d = x[:, None] - x[None, :]
    flat = d.ravel()
    flat *= flat
    flat *= -0.5 / (bandwidth * bandwidth)
    np.exp(flat, out=flat)
    return d


def _gram_median(x: np.ndarray) -> tuple[np.ndarray, float]:
    """(Gram, bandwidth) under the median heuristic, sharing one distance
    buffer when the full pairwise median is computed anyway."""
    n = x.size
    if n > MEDIAN_SUBSAMPLE_N:
        bandwidth = median_heuristic(x)
        return gaussian_gram(x, bandwidth), bandwidth
    d = x[:, None] - x[None, :]
    flat = d.ravel()
    flat *= flat
    bandwidth = _median_abs_from_squared(np.take(flat, _flat_triu(n)))
    flat *= -0.5 / (bandwidth * bandwidth)
    np.exp(flat, out=flat)
    return d, bandwidth


def _gram_for(x: np.ndarray, spec: KernelSpec) -> tuple[np.ndarray, float]:
    if spec.bandwidth is not None:
        return gaussian_gram(x, spec.bandwidth), spec.bandwidth
    return _gram_median(x)


def center_gram(gram: np.ndarray) -> np.ndarray:
    """H K H for symmetric K via row/column/grand mean subtraction."""
    row_means = gram.mean(axis=1)
    centered = gram - row_means[:, None]
    centered -= row_means[None, :]
    centered += row_means.mean()
    return centered


def _center_inplace(gram: np.ndarray) -> np.ndarray:
    row_means = gram.mean(axis=1)
    grand = row_means.mean()
    gram -= row_means[:, None]
    gram -= row_means[None, :]
    gram += grand
    return gram


def hsic_from_grams(centered_x: np.ndarray, gram_y: np.ndarray) -> float:
    """(1/n^2) tr(K H L H) given HKH and raw L (cyclic-trace identity).

    einsum keeps the reduction single-threaded and scheduling-independent.
    """
    n = centered_x.shape[0]
    return float(np.einsum("i,i->", centered_x.ravel(), gram_y.ravel()) / (n * n))


def _check_pair(x: np.ndarray, y: np.ndarray) -> int:
    if x.shape != y.shape or x.ndim != 1:
        raise LengthMismatch(f"inputs must be equal-length vectors, got {x.shape} and {y.shape}")
    n = x.size
    if n < 4:
        raise TooFewObservations("HSIC needs at least 4 observations")
    if n > MAX_DENSE_N:
        raise NotSupported(f"dense Gram matrices capped at n = {MAX_DENSE_N}, got {n}")
    return n


def hsic_statistic(
    x: np.ndarray,
    y: np.ndarray,
    kernel_x: KernelSpec = MEDIAN_HEURISTIC,
    kernel_y: KernelSpec = MEDIAN_HEURISTIC,
) -> float:
    """Biased HSIC estimate; 0 when either input is constant (centering
    annihilates constant Gram matrices, so no bandwidth is needed)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    _check_pair(x, y)
    if np.ptp(x) == 0.0 or np.ptp(y) == 0.0:
        return 0.0
    gram_x, _ = _gram_for(x, kernel_x)
    gram_y, _ = _gram_for(y, kernel_y)
    return hsic_from_grams(_center_inplace(gram_x), gram_y)


def hsic_test(
    x: np.ndarray,
    y: np.ndarray,
    permutations: int,
    rng: RandomSource,
    kernel_x: KernelSpec = MEDIAN_HEURISTIC,
    kernel_y: KernelSpec = MEDIAN_HEURISTIC,
    exhaustive: bool = False,
) -> HsicResult:
    """Permutation test of independence on the HSIC statistic.

    y is permuted within each replicate; bandwidths are fixed from the
    observed data (a permutation leaves each marginal unchanged, so the
    median heuristic is permutation-invariant anyway). The add-one p-value
    p = (1 + #{stat_r >= stat_obs}) / (R + 1) is exact-valid and never zero.
    With ``exhaustive=True`` all n! permutations (identity included) are
    enumerated instead and p = #{stat_pi >= stat_obs} / n!.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = _check_pair(x, y)
    if n < 8 and not exhaustive:
        raise TooFewObservations("HSIC permutation test needs n >= 8")
    if not exhaustive and permutations < 99:
        raise NotSupported("need at least 99 permutations")

    degenerate = np.ptp(x) == 0.0 or np.ptp(y) == 0.0
    if degenerate:
        bandwidth_x = bandwidth_y = math.nan
        centered = None
        observed = 0.0
    else:
        gram_x, bandwidth_x = _gram_for(x, kernel_x)
        gram_y, bandwidth_y = _gram_for(y, kernel_y)
        centered = _center_inplace(gram_x)
        observed = hsic_from_grams(centered, gram_y)

    def permuted_stat(perm: np.ndarray) -> float:
        if degenerate:
            return 0.0
        # rebuilding the Gram from y[perm] is bit-identical to gathering
        # L[perm][:, perm] and much cheaper than random-access indexing
        return hsic_from_grams(centered, gaussian_gram(y[perm], bandwidth_y))

    if exhaustive:
        if n > MAX_EXHAUSTIVE_N:
            raise NotSupported(f"exhaustive enumeration capped at n = {MAX_EXHAUSTIVE_N}")
        total = math.factorial(n)
        exceed = sum(
            permuted_stat(np.array(perm)) >= observed
            for perm in itertools.permutations(range(n))
        )
        return HsicResult(observed, exceed / total, total, (bandwidth_x, bandwidth_y))

    exceed = 0
    for r in range(permutations):
        perm = rng.substream("hsic-perm", r).permutation(n)
        if permuted_stat(perm) >= observed:
            exceed += 1
    p_value = (1 + exceed) / (permutations + 1)
    return HsicResult(observed, p_value, permutations, (bandwidth_x, bandwidth_y))
