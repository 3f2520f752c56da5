"""Small statistical helpers for the Monte Carlo checks."""

from __future__ import annotations

import math

import numpy as np
from scipy import stats


def mean_ci(values, conf: float = 0.95) -> dict:
    """Mean, sample std and a normal-approximation confidence interval."""
    x = np.asarray([v for v in values if v is not None], dtype=np.float64)
    n = x.size
    if n == 0:
        return {"n": 0, "mean": None, "std": None, "ci_low": None, "ci_high": None}
    m = float(x.mean())
    s = float(x.std(ddof=1)) if n > 1 else 0.0
    half = stats.norm.ppf(0.5 + conf / 2) * s / math.sqrt(n)
    return {"n": n, "mean": m, "std": s, "ci_low": m - half, "ci_high": m + half}


def two_proportion_greater(hits_a: int, n_a: int, hits_b: int, n_b: int) -> float:
    """One-sided p-value for H1: rate a > rate b (pooled z-test)."""
    pa, pb = hits_a / n_a, hits_b / n_b
    pooled = (hits_a + hits_b) / (n_a + n_b)
    se = math.sqrt(pooled * (1 - pooled) * (1 / n_a + 1 / n_b))
    if se == 0:
        return 0.0 if pa > pb else 1.0
    return float(stats.norm.sf((pa - pb) / se))


def welch_greater(a, b) -> float:
    """One-sided Welch t-test p-value for H1: mean(a) > mean(b)."""
    return float(stats.ttest_ind(a, b, equal_var=False, alternative="greater").pvalue)


def clopper_pearson(hits, n: int, conf: float):
    """Exact two-sided binomial interval; vectorized over ``hits``."""
    hits = np.asarray(hits, dtype=np.float64)
    alpha = 1 - conf
    lo = np.where(hits > 0, stats.beta.ppf(alpha / 2, hits, n - hits + 1), 0.0)
    hi = np.where(hits < n, stats.beta.ppf(1 - alpha / 2, hits + 1, n - hits), 1.0)
    return lo, hi


def band_consistent(counts, draws: int, lower, upper, family_conf: float = 0.99) -> np.ndarray:
    """Per-site check that an empirical frequency is compatible with a probability in [lower, upper].

    Each site gets a Clopper-Pearson interval at the Bonferroni-adjusted level, so
    the whole family holds with probability ``family_conf``. A site passes when its
    interval meets the band.
    """
    counts = np.asarray(counts)
    m = counts.size
    lo, hi = clopper_pearson(counts, draws, 1 - (1 - family_conf) / m)
    return (hi >= np.asarray(lower)) & (lo <= np.asarray(upper))


def spearman_increasing(x, y) -> tuple[float, float]:
    """Spearman rank correlation and its one-sided p-value for an increasing trend."""
    res = stats.spearmanr(x, y, alternative="greater")
    return float(res.statistic), float(res.pvalue)
