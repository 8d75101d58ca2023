from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class AggregationError(ValueError):
    pass


@dataclass
class AggregationOutcome:
    """Merged model plus per-(dimension, update) flags and combine weights.

    ``flags`` and ``weights`` have shape ``(D, count)`` with columns in the
    order the updates were presented.
    """

    global_model: np.ndarray
    flags: np.ndarray
    weights: np.ndarray


def ordered_sum(mat: np.ndarray) -> np.ndarray:
    """Correctly rounded column sums, hence independent of row order."""
    mat = np.asarray(mat, dtype=np.float64)
    return np.array([math.fsum(mat[:, j]) for j in range(mat.shape[1])])


def weighted_mean(values: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Per-column ``sum(w*v)/sum(w)`` for ``(count, D)`` values and weights."""
    return ordered_sum(weights * values) / ordered_sum(weights)


def uniform_outcome(global_model: np.ndarray, count: int) -> AggregationOutcome:
    d = global_model.size
    return AggregationOutcome(
        global_model, np.zeros((d, count), dtype=bool), np.full((d, count), 1.0 / count)
    )


def per_client_outcome(global_model: np.ndarray, client_weights: np.ndarray) -> AggregationOutcome:
    """Outcome for rules that weight whole updates; zero weight means flagged."""
    w = np.asarray(client_weights, dtype=np.float64)
    d = global_model.size
    weights = np.tile(w / w.sum(), (d, 1))
    return AggregationOutcome(global_model, np.tile(w == 0, (d, 1)), weights)
