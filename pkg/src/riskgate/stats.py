"""Paired bootstrap, exact binomial and 2x2 tests, non-inferiority and the
delta-of-deltas regime detector."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats as sps


class InsufficientSeeds(ValueError):
    pass


DEFAULT_RESAMPLES = 10_000
DEFAULT_STREAM = 20240601


def _as_array(xs: Sequence[float], minimum: int = 2) -> np.ndarray:
    arr = np.asarray(list(xs), dtype=float)
    if arr.ndim != 1 or arr.size < minimum:
        raise InsufficientSeeds(f"need at least {minimum} seeds, got {arr.size}")
    return arr


def _resample_means(arr: np.ndarray, resamples: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, arr.size, size=(resamples, arr.size))
    return arr[idx].mean(axis=1)


def paired_bootstrap(
    deltas: Sequence[float],
    resamples: int = DEFAULT_RESAMPLES,
    seed: int = DEFAULT_STREAM,
    level: float = 0.95,
) -> tuple[float, float, float]:
    """Percentile bootstrap of the mean per-seed paired delta."""
    arr = _as_array(deltas)
    means = _resample_means(arr, resamples, seed)
    a = (1 - level) / 2
    lo, hi = np.quantile(means, [a, 1 - a])
    mean = float(arr.mean())
    # all-equal samples: pin the interval to the point estimate exactly
    if np.all(arr == arr[0]):
        return mean, mean, mean
    return mean, float(lo), float(hi)


def clopper_pearson(k: int, n: int, level: float = 0.95) -> tuple[float, float]:
    if n < 1 or not 0 <= k <= n:
        raise ValueError("need 0 <= k <= n and n >= 1")
    a = 1 - level
    lo = 0.0 if k == 0 else float(sps.beta.ppf(a / 2, k, n - k + 1))
    hi = 1.0 if k == n else float(sps.beta.ppf(1 - a / 2, k + 1, n - k))
    return lo, hi


def _hypergeom_pmf_table(row1: int, col1: int, n: int) -> tuple[int, int, list[float]]:
    lo = max(0, row1 + col1 - n)
    hi = min(row1, col1)
    denom = math.comb(n, col1)
    pmf = [math.comb(row1, x) * math.comb(n - row1, col1 - x) / denom for x in range(lo, hi + 1)]
    return lo, hi, pmf


def fisher_exact(table: Sequence[Sequence[int]]) -> float:
    """Two-sided p: total probability of tables no more likely than observed."""
    (a, b), (c, d) = table
    if min(a, b, c, d) < 0:
        raise ValueError("counts must be non-negative")
    n = a + b + c + d
    if n == 0:
        return 1.0
    row1, col1 = a + b, a + c
    lo, _, pmf = _hypergeom_pmf_table(row1, col1, n)
    p_obs = pmf[a - lo]
    tol = 1 + 1e-7
    p = math.fsum(p for p in pmf if p <= p_obs * tol)
    return min(1.0, p)


def agresti_caffo(k1: int, n1: int, k2: int, n2: int, level: float = 0.95) -> tuple[float, float]:
    """Add-one adjusted Wald interval for p1 - p2."""
    p1 = (k1 + 1) / (n1 + 2)
    p2 = (k2 + 1) / (n2 + 2)
    se = math.sqrt(p1 * (1 - p1) / (n1 + 2) + p2 * (1 - p2) / (n2 + 2))
    z = float(sps.norm.ppf(1 - (1 - level) / 2))
    d = p1 - p2
    return d - z * se, d + z * se


@dataclass(frozen=True)
class NonInferiority:
    mean: float
    upper: float
    passed: bool


def noninferiority(
    deltas_pp: Sequence[float],
    margin: float = 0.5,
    resamples: int = DEFAULT_RESAMPLES,
    seed: int = DEFAULT_STREAM,
    level: float = 0.95,
) -> NonInferiority:
    """Seed-level bootstrap one-sided upper bound on the mean difference."""
    arr = _as_array(deltas_pp)
    mean = float(arr.mean())
    if np.all(arr == arr[0]):
        upper = mean
    else:
        upper = float(np.quantile(_resample_means(arr, resamples, seed), level))
    return NonInferiority(mean, upper, upper < margin)


@dataclass(frozen=True)
class DoDResult:
    mean: float
    ci_low: float
    ci_high: float
    material: bool


def dod_detector(
    slice_deltas: Sequence[float],
    benign_deltas: Sequence[float],
    resamples: int = DEFAULT_RESAMPLES,
    seed: int = DEFAULT_STREAM,
    floor_ms: float = 10.0,
    level: float = 0.95,
) -> DoDResult:
    """Paired delta-of-deltas; positive means the slice delta moved up."""
    s = _as_array(slice_deltas)
    b = _as_array(benign_deltas)
    if s.size != b.size:
        raise ValueError("slice and benign deltas must be paired by seed")
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, s.size, size=(resamples, s.size))
    boot = s[idx].mean(axis=1) - b[idx].mean(axis=1)
    mean = float(s.mean() - b.mean())
    a = (1 - level) / 2
    if np.all(boot == boot[0]):
        lo = hi = mean
    else:
        lo, hi = (float(q) for q in np.quantile(boot, [a, 1 - a]))
    material = (lo > 0 or hi < 0) and abs(mean) >= floor_ms
    return DoDResult(mean, lo, hi, material)
