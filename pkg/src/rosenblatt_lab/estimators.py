"""Statistical estimators for self-similarity and path regularity."""

from __future__ import annotations

import numpy as np
from scipy import stats

from .kernels import DomainError
from .rosenblatt import SamplePath

__all__ = ["hurst_estimate", "holder_estimate", "ks_two_sample"]


def _values(path) -> np.ndarray:
    return path.values if isinstance(path, SamplePath) else np.asarray(path, float)


def hurst_estimate(path, *, min_blocks: int = 8) -> float:
    """Aggregated-variance estimate of the self-similarity exponent.

    Dyadic block sums of increments scale like ``(m delta)^H``; the slope
    of log mean-square block sums against log block size is ``2H``.  The
    mean square is taken about zero -- increments of the processes under
    study are centred by construction -- which avoids the heavy
    small-sample bias of centring with the grand mean under long-range
    dependence.  Translation-invariant since only increments enter.
    """
    x = _values(path)
    n = x.size - 1
    if n < 256:
        raise DomainError("aggregated variance needs at least 256 cells")
    sizes, meansq = [], []
    m = 1
    while n // m >= min_blocks:
        k = (n // m) * m
        sums = np.diff(x[: k + 1 : m])
        sizes.append(m)
        meansq.append(float(np.mean(sums ** 2)))
        m *= 2
    slope = np.polyfit(np.log(sizes), np.log(meansq), 1)[0]
    return float(slope / 2.0)


def holder_estimate(path, *, max_lag: int = 32) -> float:
    """Empirical Hoelder exponent from maxima of lagged increments.

    Log-log regression of the maximum increment over the lag.  One
    increment per coarse block enters each maximum, so every lag's max
    ranges over the same number of candidates; otherwise the
    extreme-value factor (which grows with the candidate count, strongly
    so for the exponential-tailed second chaos) would vary across lags
    and contaminate the slope.
    """
    x = _values(path)
    n = x.size - 1
    if n < 1024:
        raise DomainError("Hoelder regression needs at least 1024 cells")
    lags = [l for l in (1, 2, 4, 8, 16, 32) if l <= max_lag]
    coarse = max(lags)
    starts = np.arange(0, n - coarse + 1, coarse)
    sups = [float(np.max(np.abs(x[starts + l] - x[starts]))) for l in lags]
    slope = np.polyfit(np.log(lags), np.log(sups), 1)[0]
    return float(slope)


def ks_two_sample(a, b) -> tuple[float, float]:
    """Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value."""
    a = np.asarray(a, float).ravel()
    b = np.asarray(b, float).ravel()
    if a.size < 100 or b.size < 100:
        raise DomainError("need at least 100 samples per side")
    res = stats.ks_2samp(a, b, method="asymp")
    return float(res.statistic), float(res.pvalue)
