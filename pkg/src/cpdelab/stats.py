"""Small statistics helpers shared by the estimators and the CLI."""

from __future__ import annotations

import math

#: two-sided 95% normal quantile
Z95 = 1.959963984540054


def wilson_interval(successes: int, n: int,
                    z: float = Z95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if n <= 0:
        raise ValueError("n must be positive")
    if not 0 <= successes <= n:
        raise ValueError("successes must lie in [0, n]")
    phat = successes / n
    z2 = z * z
    denom = 1.0 + z2 / n
    center = (phat + z2 / (2.0 * n)) / denom
    half = (z / denom) * math.sqrt(phat * (1.0 - phat) / n
                                   + z2 / (4.0 * n * n))
    return (max(0.0, center - half), min(1.0, center + half))


def two_proportion_z(k1: int, n1: int, k2: int, n2: int) -> float:
    """z-score of p1 - p2 under independent binomial sampling (unpooled)."""
    p1, p2 = k1 / n1, k2 / n2
    se = math.sqrt(p1 * (1.0 - p1) / n1 + p2 * (1.0 - p2) / n2)
    if se == 0.0:
        return 0.0 if p1 == p2 else math.copysign(math.inf, p1 - p2)
    return (p1 - p2) / se


def proportion_z(k: int, n: int, p0: float) -> float:
    """z-score of an observed proportion against a known null value."""
    se = math.sqrt(p0 * (1.0 - p0) / n)
    if se == 0.0:
        return 0.0 if k / n == p0 else math.copysign(math.inf, k / n - p0)
    return (k / n - p0) / se


def mean_z(values, mu0: float) -> float:
    """z-score of a sample mean against a known null mean (sample sd)."""
    n = len(values)
    m = sum(values) / n
    var = sum((x - m) ** 2 for x in values) / (n - 1)
    if var == 0.0:
        return 0.0 if m == mu0 else math.copysign(math.inf, m - mu0)
    return (m - mu0) / math.sqrt(var / n)


def empirical_survival_distance(sorted_samples, survival_fn) -> float:
    """Sup distance between the empirical survival function of the samples
    and a reference survival function (Kolmogorov-Smirnov style, evaluated
    at the jump points)."""
    n = len(sorted_samples)
    worst = 0.0
    for i, t in enumerate(sorted_samples):
        s = survival_fn(t)
        before = (n - i) / n      # value just left of the jump
        after = (n - i - 1) / n   # value at and right of the jump
        worst = max(worst, abs(s - before), abs(s - after))
    return worst
