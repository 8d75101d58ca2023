"""Coordinate-wise and distance-based aggregation rules."""

from __future__ import annotations

import math

import numpy as np

from .base import (
    AggregationError,
    AggregationOutcome,
    ordered_sum,
    per_client_outcome,
    uniform_outcome,
)


def _ids(bs_ids, count: int) -> np.ndarray:
    return np.arange(count) if bs_ids is None else np.asarray(bs_ids)


def agg_mean(updates: np.ndarray) -> AggregationOutcome:
    mat = np.asarray(updates, dtype=np.float64)
    return uniform_outcome(ordered_sum(mat) / mat.shape[0], mat.shape[0])


def agg_median(updates: np.ndarray) -> AggregationOutcome:
    mat = np.asarray(updates, dtype=np.float64)
    count, dim = mat.shape
    order = np.argsort(mat, axis=0, kind="stable")
    weights = np.zeros((count, dim))
    cols = np.arange(dim)
    mid = count // 2
    if count % 2:
        weights[order[mid], cols] = 1.0
    else:
        weights[order[mid - 1], cols] = 0.5
        weights[order[mid], cols] = 0.5
    return AggregationOutcome(np.median(mat, axis=0), np.zeros((dim, count), dtype=bool), weights.T)


def agg_trimmed_mean(updates: np.ndarray, trim_fraction: float = 0.2) -> AggregationOutcome:
    """Drop the ``floor(beta*count)`` largest and smallest values per coordinate."""
    mat = np.asarray(updates, dtype=np.float64)
    count, dim = mat.shape
    cut = int(math.floor(trim_fraction * count))
    if trim_fraction < 0 or 2 * cut >= count:
        raise AggregationError(f"cannot trim {cut} from each side of {count} updates")
    order = np.argsort(mat, axis=0, kind="stable")
    kept = np.sort(mat, axis=0)[cut : count - cut]
    value = ordered_sum(kept) / kept.shape[0]
    flags = np.zeros((count, dim), dtype=bool)
    cols = np.arange(dim)
    for rank in list(range(cut)) + list(range(count - cut, count)):
        flags[order[rank], cols] = True
    weights = np.where(flags, 0.0, 1.0 / (count - 2 * cut))
    return AggregationOutcome(value, flags.T, weights.T)


def krum_scores(mat: np.ndarray, f: int) -> np.ndarray:
    count = mat.shape[0]
    sq = np.sum((mat[:, None, :] - mat[None, :, :]) ** 2, axis=2)
    neighbours = count - f - 2
    scores = np.empty(count)
    for i in range(count):
        others = np.sort(np.delete(sq[i], i))
        scores[i] = others[:neighbours].sum()
    return scores


def agg_krum(updates: np.ndarray, f: int, bs_ids=None) -> AggregationOutcome:
    """Select the update with the smallest summed squared distance to its
    ``count - f - 2`` nearest neighbours; ties go to the lowest bs_id."""
    mat = np.asarray(updates, dtype=np.float64)
    count = mat.shape[0]
    if f < 0 or count < f + 3:
        raise AggregationError(f"Krum needs at least f+3={f + 3} updates, got {count}")
    ids = _ids(bs_ids, count)
    scores = krum_scores(mat, f)
    best = min(np.flatnonzero(scores == scores.min()), key=lambda i: ids[i])
    w = np.zeros(count)
    w[best] = 1.0
    return per_client_outcome(mat[best].copy(), w)


def agg_faba(updates: np.ndarray, remove_fraction: float = 0.2, bs_ids=None) -> AggregationOutcome:
    """Repeatedly drop the update farthest from the running mean.

    Realized from a one-line description: ``floor(remove_fraction*count)``
    single removals, each against the mean of the survivors, distance ties
    removing the lowest bs_id first.
    """
    mat = np.asarray(updates, dtype=np.float64)
    count = mat.shape[0]
    removals = int(math.floor(remove_fraction * count))
    if remove_fraction < 0 or removals >= count:
        raise AggregationError(f"cannot remove {removals} of {count} updates")
    ids = _ids(bs_ids, count)
    alive = np.ones(count, dtype=bool)
    for _ in range(removals):
        idx = np.flatnonzero(alive)
        centre = ordered_sum(mat[idx]) / idx.size
        dist = np.linalg.norm(mat[idx] - centre, axis=1)
        far = idx[dist == dist.max()]
        alive[min(far, key=lambda i: ids[i])] = False
    idx = np.flatnonzero(alive)
    return per_client_outcome(ordered_sum(mat[idx]) / idx.size, alive.astype(float))
