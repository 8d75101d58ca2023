"""Similarity- and reputation-weighted rules.

These are concrete readings of rules known here only by short descriptions;
each function notes where the formula is our choice.
"""

from __future__ import annotations

import numpy as np

from .base import AggregationOutcome, ordered_sum, per_client_outcome


def _cosine_matrix(mat: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(mat, axis=1)
    safe = np.where(norms > 0, norms, 1.0)
    unit = mat / safe[:, None]
    cs = unit @ unit.T
    cs[norms == 0, :] = 0.0
    cs[:, norms == 0] = 0.0
    return np.clip(cs, -1.0, 1.0)


def foolsgold_weights(histories: np.ndarray) -> np.ndarray:
    """Per-client weights from cumulative update histories.

    1 - max cosine similarity to any other client, with the usual pardoning
    (similarities scaled down for clients less similar to the crowd than
    their partner) and the logit stretch, clipped to [0, 1].
    """
    h = np.asarray(histories, dtype=np.float64)
    count = h.shape[0]
    if count == 1:
        return np.ones(1)
    cs = _cosine_matrix(h)
    np.fill_diagonal(cs, 0.0)
    maxcs = cs.max(axis=1)
    for i in range(count):
        for j in range(count):
            if i != j and maxcs[i] < maxcs[j] and maxcs[j] > 0:
                cs[i, j] *= maxcs[i] / maxcs[j]
    wv = np.clip(1.0 - cs.max(axis=1), 0.0, 1.0)
    if wv.max() == 0:
        return wv
    wv = wv / wv.max()
    wv[wv == 1.0] = 0.99
    with np.errstate(divide="ignore"):
        wv = np.log(wv / (1.0 - wv)) + 0.5
    wv[~np.isfinite(wv) & (wv < 0)] = 0.0
    return np.clip(wv, 0.0, 1.0)


def agg_foolsgold(updates: np.ndarray, histories: np.ndarray) -> AggregationOutcome:
    """Weighted mean of the current models using FoolsGold history weights.

    ``histories`` rows align with ``updates`` rows. If every weight is zero
    all updates are kept with equal weight.

    Our reading: histories are cumulative sums of each BS's submitted deltas
    (keyed by bs_id across rounds) and the weights multiply the submitted
    models, not the deltas.
    """
    mat = np.asarray(updates, dtype=np.float64)
    w = foolsgold_weights(histories)
    if w.sum() <= 0:
        w = np.ones(mat.shape[0])
    value = ordered_sum(w[:, None] * mat) / ordered_sum(w[:, None])[0]
    return per_client_outcome(value, w)


def fltrust_scores(deltas: np.ndarray, server_delta: np.ndarray) -> np.ndarray:
    s_norm = np.linalg.norm(server_delta)
    norms = np.linalg.norm(deltas, axis=1)
    if s_norm == 0:
        return np.zeros(deltas.shape[0])
    cos = np.where(norms > 0, deltas @ server_delta / (np.where(norms > 0, norms, 1.0) * s_norm), 0.0)
    return np.maximum(cos, 0.0)


def agg_fltrust(
    updates: np.ndarray, global_model: np.ndarray, server_update: np.ndarray
) -> AggregationOutcome:
    """Trust-weighted mean of norm-matched deltas relative to ``global_model``.

    ``server_update`` is the server's own model fine-tuned from
    ``global_model`` on its clean root data. With no trusted client the
    server's delta is applied alone.

    Our reading: trust is the ReLU of the cosine between a BS's delta and the
    server's delta, and every delta is rescaled to the server delta's norm
    before the trust-weighted average.
    """
    mat = np.asarray(updates, dtype=np.float64)
    theta = np.asarray(global_model, dtype=np.float64)
    deltas = mat - theta
    server_delta = np.asarray(server_update, dtype=np.float64) - theta
    trust = fltrust_scores(deltas, server_delta)
    s_norm = np.linalg.norm(server_delta)
    norms = np.linalg.norm(deltas, axis=1)
    scaled = deltas * (s_norm / np.where(norms > 0, norms, 1.0))[:, None]
    if trust.sum() <= 0:
        d = theta.size
        return AggregationOutcome(
            theta + server_delta,
            np.ones((d, mat.shape[0]), dtype=bool),
            np.zeros((d, mat.shape[0])),
        )
    value = theta + ordered_sum(trust[:, None] * scaled) / ordered_sum(trust[:, None])[0]
    return per_client_outcome(value, trust)


def flair_flip_scores(
    updates: np.ndarray, global_model: np.ndarray, previous_global: np.ndarray | None
) -> np.ndarray:
    """Fraction of coordinates whose direction disagrees with the last global step."""
    mat = np.asarray(updates, dtype=np.float64)
    if previous_global is None:
        return np.zeros(mat.shape[0])
    trend = np.sign(global_model - previous_global)
    return np.mean(np.sign(mat - global_model) != trend, axis=1)


def agg_flair(
    updates: np.ndarray,
    suspicion: np.ndarray,
    global_model: np.ndarray,
    previous_global: np.ndarray | None,
    decay: float = 0.9,
    sharpness: float = 5.0,
) -> tuple[AggregationOutcome, np.ndarray]:
    """Suspicion-weighted mean; returns the outcome and the updated suspicion.

    Our reading: suspicion is an exponential moving average (``decay``) of
    flip scores, and weights are ``exp(-sharpness * suspicion)``.
    """
    mat = np.asarray(updates, dtype=np.float64)
    flips = flair_flip_scores(mat, global_model, previous_global)
    new_suspicion = decay * np.asarray(suspicion, dtype=np.float64) + (1.0 - decay) * flips
    w = np.exp(-sharpness * new_suspicion)
    value = ordered_sum(w[:, None] * mat) / ordered_sum(w[:, None])[0]
    return per_client_outcome(value, w), new_suspicion
