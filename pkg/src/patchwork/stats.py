"""Interval and goodness-of-fit helpers used by reports and the theorem suite."""

from __future__ import annotations

import math

import numpy as np
from scipy import stats


def binomial_interval(p: float, n: int, level: float = 0.99) -> tuple[float, float]:
    """Central ``level`` acceptance interval for the observed rate of Binomial(n, p)."""
    tail = (1.0 - level) / 2.0
    lo = stats.binom.ppf(tail, n, p)
    hi = stats.binom.ppf(1.0 - tail, n, p)
    return float(lo) / n, float(hi) / n


def proportion_ci(successes: int, n: int, level: float = 0.99) -> tuple[float, float]:
    """Exact (Clopper-Pearson) confidence interval for an observed proportion."""
    if n == 0:
        return 0.0, 1.0
    ci = stats.binomtest(successes, n).proportion_ci(confidence_level=level, method="exact")
    return float(ci.low), float(ci.high)


def upper_slack(p: float, n: int, sigmas: float = 3.0) -> float:
    """``p`` plus ``sigmas`` binomial standard errors at sample size ``n``."""
    return p + sigmas * math.sqrt(p * (1.0 - p) / n)


def mean_ci(values, level: float = 0.99) -> tuple[float, float, float]:
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        return math.nan, math.nan, math.nan
    mean = float(arr.mean())
    if arr.size < 2:
        return mean, mean, mean
    half = stats.norm.ppf(0.5 + level / 2.0) * float(arr.std(ddof=1)) / math.sqrt(arr.size)
    return mean, mean - half, mean + half


def geometric_ks(samples, p: float) -> tuple[float, float]:
    """KS distance between integer samples (days >= 1) and Geometric(p), with the 1% critical value.

    Non-finite samples count as exceeding every observed day.
    """
    arr = np.asarray(samples, dtype=float)
    n = arr.size
    finite = arr[np.isfinite(arr)]
    top = int(finite.max()) if finite.size else 1
    days = np.arange(1, top + 1)
    empirical = np.searchsorted(np.sort(finite), days, side="right") / n
    model = 1.0 - (1.0 - p) ** days
    d = float(np.max(np.abs(empirical - model))) if days.size else 0.0
    return d, float(stats.kstwo.ppf(0.99, n))
