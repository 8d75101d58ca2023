"""Percentile-pair trimming with deviation-inverse weighting (GLID).

For every coordinate the submitted values are scored by their percentile in
the sorted column. Values whose percentile falls outside a per-coordinate
``(lo, hi)`` pair are dropped; survivors are averaged with weights
``sigma / |value - mean|``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import AggregationError, AggregationOutcome, ordered_sum
from .ocsvm import svm_flags

WEIGHT_FLOOR = 1e-12
SIGMA_FLOOR = 1e-12

ESTIMATORS = ("sd", "iqr", "zscore", "svm")


@dataclass(frozen=True)
class GlidConfig:
    estimator: str = "sd"
    k: float = 3.0
    k_iqr: float = 1.5
    k_z: float = 2.0
    nu: float = 0.2
    bandwidth: float | None = None
    fixed_pair: tuple[float, float] | None = None

    def __post_init__(self):
        if self.estimator not in ESTIMATORS:
            raise ValueError(f"unknown estimator {self.estimator!r}; choose from {ESTIMATORS}")
        if self.k <= 0 or self.k_iqr < 0 or self.k_z <= 0:
            raise ValueError("k and k_z must be positive, k_iqr nonnegative")
        if not 0.0 < self.nu < 1.0:
            raise ValueError("nu must lie in (0, 1)")
        if self.fixed_pair is not None:
            lo, hi = self.fixed_pair
            if not 0.0 <= lo < hi <= 100.0:
                raise ValueError("fixed_pair needs 0 <= lo < hi <= 100")
            object.__setattr__(self, "fixed_pair", (float(lo), float(hi)))


def _midranks(sorted_values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Distinct values and their 1-based average ranks."""
    uniq, first, counts = np.unique(sorted_values, return_index=True, return_counts=True)
    return uniq, first + (counts + 1) / 2.0


def percentile_of(sorted_values, x, n_total: int | None = None):
    """``((P(x) - 0.5) / n_total) * 100`` with ``P`` the 1-based rank of ``x``.

    Tied samples share their average rank. Between samples the rank is
    interpolated linearly; below the minimum it is 1 and above the maximum it
    is ``n_total``. Accepts a scalar or an array of query points.
    """
    s = np.asarray(sorted_values, dtype=np.float64)
    if s.size == 0:
        raise AggregationError("percentile of an empty sample")
    n = s.size if n_total is None else n_total
    uniq, ranks = _midranks(s)
    xq = np.asarray(x, dtype=np.float64)
    pos = np.interp(xq, uniq, ranks)
    pos = np.where(xq < uniq[0], 1.0, pos)
    pos = np.where(xq > uniq[-1], float(n), pos)
    out = (pos - 0.5) / n * 100.0
    return float(out) if out.ndim == 0 else out


def percentile_pair_sd(values, k: float) -> tuple[float, float]:
    v = np.sort(np.asarray(values, dtype=np.float64))
    mean = v.sum() / v.size
    std = np.sqrt(np.sum((v - mean) ** 2) / v.size)
    return percentile_of(v, mean - k * std), percentile_of(v, mean + k * std)


def percentile_pair_z(values, k_z: float) -> tuple[float, float]:
    return percentile_pair_sd(values, k_z)


def percentile_pair_iqr(values, k_iqr: float) -> tuple[float, float]:
    v = np.sort(np.asarray(values, dtype=np.float64))
    q1, q3 = np.percentile(v, [25.0, 75.0])
    iqr = q3 - q1
    return percentile_of(v, q1 - k_iqr * iqr), percentile_of(v, q3 + k_iqr * iqr)


def _flag_column(col: np.ndarray, cfg: GlidConfig) -> np.ndarray:
    if cfg.fixed_pair is None and cfg.estimator == "svm":
        return svm_flags(col, cfg.nu, cfg.bandwidth)
    s = np.sort(col)
    if cfg.fixed_pair is not None:
        lo, hi = cfg.fixed_pair
    elif cfg.estimator == "sd":
        lo, hi = percentile_pair_sd(s, cfg.k)
    elif cfg.estimator == "zscore":
        lo, hi = percentile_pair_z(s, cfg.k_z)
    else:
        lo, hi = percentile_pair_iqr(s, cfg.k_iqr)
    pct = percentile_of(s, col)
    return (pct < lo) | (pct > hi)


def _median_weights(col: np.ndarray) -> np.ndarray:
    order = np.argsort(col, kind="stable")
    w = np.zeros(col.size)
    mid = col.size // 2
    if col.size % 2:
        w[order[mid]] = 1.0
    else:
        w[order[mid - 1]] = w[order[mid]] = 0.5
    return w


def glid_column(col: np.ndarray, cfg: GlidConfig) -> tuple[float, np.ndarray, np.ndarray]:
    """Aggregate one coordinate: ``(value, flags, normalized weights)``."""
    n = col.size
    mean = ordered_sum(col[:, None])[0] / n
    sigma = float(np.sqrt(ordered_sum(((col - mean) ** 2)[:, None])[0] / n))
    if sigma < SIGMA_FLOOR:
        return float(np.median(col)), np.zeros(n, dtype=bool), _median_weights(col)
    flags = _flag_column(col, cfg)
    if flags.all():
        # nothing survives: fall back to the plain median, nothing dropped
        return float(np.median(col)), np.zeros(n, dtype=bool), _median_weights(col)
    alpha = np.where(flags, 0.0, sigma / np.maximum(np.abs(col - mean), WEIGHT_FLOOR))
    total = ordered_sum(alpha[:, None])[0]
    value = ordered_sum((alpha * col)[:, None])[0] / total
    survivors = col[~flags]
    value = float(np.clip(value, survivors.min(), survivors.max()))
    return value, flags, alpha / total


def agg_glid(updates: np.ndarray, cfg: GlidConfig | None = None) -> AggregationOutcome:
    cfg = cfg or GlidConfig()
    mat = np.asarray(updates, dtype=np.float64)
    if mat.ndim != 2 or mat.shape[0] < 2:
        raise AggregationError("GLID needs at least two updates")
    count, dim = mat.shape
    out = np.empty(dim)
    flags = np.zeros((dim, count), dtype=bool)
    weights = np.zeros((dim, count))
    for d in range(dim):
        out[d], flags[d], weights[d] = glid_column(mat[:, d], cfg)
    return AggregationOutcome(out, flags, weights)
