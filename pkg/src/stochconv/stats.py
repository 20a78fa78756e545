"""Confidence intervals shared by the estimators: batch means and Wilson."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats

LEVEL = 0.95
DEFAULT_BATCHES = 50


@dataclass(frozen=True)
class Estimate:
    """A point estimate with a two-sided 95% interval.

    ``provenance`` is one of ``"exact"``, ``"quadrature"`` or ``"mc"``.
    """

    value: float
    ci_low: float
    ci_high: float
    n: int = 0
    provenance: str = "mc"

    @property
    def half_width(self) -> float:
        return 0.5 * (self.ci_high - self.ci_low)

    def covers(self, x: float) -> bool:
        return self.ci_low <= x <= self.ci_high

    def to_dict(self) -> dict:
        return asdict(self)


def t_quantile(n_batches: int, level: float = LEVEL) -> float:
    return float(stats.t.ppf(0.5 + level / 2, n_batches - 1))


def batch_split(n: int, n_batches: int) -> np.ndarray:
    """Batch labels for ``n`` samples in contiguous, nearly equal batches."""
    if n < n_batches:
        raise ValueError(f"need at least {n_batches} samples for batch means, got {n}")
    return (np.arange(n) * n_batches) // n


def batch_means(values: np.ndarray, n_batches: int = DEFAULT_BATCHES, level: float = LEVEL) -> Estimate:
    """Mean of ``values`` with a batch-means t interval."""
    values = np.asarray(values, dtype=float)
    labels = batch_split(values.size, n_batches)
    sums = np.bincount(labels, weights=values, minlength=n_batches)
    counts = np.bincount(labels, minlength=n_batches)
    means = sums / counts
    mean = float(values.mean())
    se = float(means.std(ddof=1) / np.sqrt(n_batches))
    hw = t_quantile(n_batches, level) * se
    return Estimate(mean, mean - hw, mean + hw, values.size, "mc")


def batch_statistic(stat_per_batch: np.ndarray, point: float, n: int, level: float = LEVEL) -> Estimate:
    """Interval for a nonlinear statistic from its per-batch replicates."""
    b = len(stat_per_batch)
    se = float(np.std(stat_per_batch, ddof=1) / np.sqrt(b))
    hw = t_quantile(b, level) * se
    return Estimate(point, point - hw, point + hw, n, "mc")


def wilson_interval(successes, n: int, level: float = LEVEL) -> tuple[np.ndarray, np.ndarray]:
    """Wilson score interval for binomial proportions (vectorized over ``successes``)."""
    k = np.asarray(successes, dtype=float)
    z = stats.norm.ppf(0.5 + level / 2)
    phat = k / n
    denom = 1.0 + z * z / n
    centre = (phat + z * z / (2 * n)) / denom
    half = z * np.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n)) / denom
    return np.clip(centre - half, 0.0, 1.0), np.clip(centre + half, 0.0, 1.0)
