"""Aggregation rules behind one interface.

:class:`Aggregator` owns the cross-round state some rules need (FoolsGold
histories, FLAIR suspicion) keyed by bs_id. It only ever sees bs_ids and
parameter vectors.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .base import AggregationError, AggregationOutcome, ordered_sum, weighted_mean
from .classic import agg_faba, agg_krum, agg_mean, agg_median, agg_trimmed_mean
from .glid import (
    GlidConfig,
    agg_glid,
    percentile_of,
    percentile_pair_iqr,
    percentile_pair_sd,
    percentile_pair_z,
)
from .ocsvm import OneClassSvmModel, fit_one_class_svm, svm_flags
from .similarity import agg_flair, agg_fltrust, agg_foolsgold, foolsgold_weights

RULES = ("mean", "median", "trim", "krum", "foolsgold", "faba", "fltrust", "flair", "glid")


@dataclass(frozen=True)
class AggregatorConfig:
    kind: str = "glid"
    trim_fraction: float = 0.2
    krum_f: int | None = None
    faba_fraction: float = 0.2
    flair_decay: float = 0.9
    flair_sharpness: float = 5.0
    glid: GlidConfig = field(default_factory=GlidConfig)

    def __post_init__(self):
        if self.kind not in RULES:
            raise AggregationError(f"unknown aggregation rule {self.kind!r}; choose from {RULES}")


@dataclass
class AggContext:
    """Server-side information available to a rule in one round."""

    bs_ids: np.ndarray
    round: int = 0
    global_model: np.ndarray | None = None
    previous_global: np.ndarray | None = None
    server_update: np.ndarray | None = None
    expected_malicious: int = 0


class Aggregator:
    def __init__(self, cfg: AggregatorConfig):
        self.cfg = cfg
        self.histories: dict[int, np.ndarray] = {}
        self.suspicion: dict[int, float] = {}

    def __call__(self, updates, ctx: AggContext) -> AggregationOutcome:
        mat = np.asarray(updates, dtype=np.float64)
        if mat.ndim != 2 or mat.shape[0] < 1:
            raise AggregationError("need at least one update of uniform length")
        if not np.all(np.isfinite(mat)):
            raise AggregationError("updates contain non-finite values")
        ids = [int(i) for i in ctx.bs_ids]
        kind = self.cfg.kind
        if kind == "mean":
            return agg_mean(mat)
        if kind == "median":
            return agg_median(mat)
        if kind == "trim":
            return agg_trimmed_mean(mat, self.cfg.trim_fraction)
        if kind == "krum":
            f = self.cfg.krum_f if self.cfg.krum_f is not None else ctx.expected_malicious
            return agg_krum(mat, f, ctx.bs_ids)
        if kind == "faba":
            return agg_faba(mat, self.cfg.faba_fraction, ctx.bs_ids)
        if kind == "glid":
            if mat.shape[0] == 1:
                raise AggregationError("GLID needs at least two updates")
            return agg_glid(mat, self.cfg.glid)
        theta = ctx.global_model if ctx.global_model is not None else ordered_sum(mat) / mat.shape[0]
        if kind == "foolsgold":
            rows = []
            for i, row in zip(ids, mat):
                hist = self.histories.get(i, np.zeros_like(row)) + (row - theta)
                self.histories[i] = hist
                rows.append(hist)
            return agg_foolsgold(mat, np.vstack(rows))
        if kind == "fltrust":
            if ctx.server_update is None:
                raise AggregationError("FLTrust needs the server's root-data update")
            return agg_fltrust(mat, theta, ctx.server_update)
        # flair
        prior = np.array([self.suspicion.get(i, 0.0) for i in ids])
        outcome, post = agg_flair(
            mat, prior, theta, ctx.previous_global, self.cfg.flair_decay, self.cfg.flair_sharpness
        )
        self.suspicion.update(zip(ids, post.tolist()))
        return outcome


def aggregate(rule: str, updates, ctx: AggContext | None = None, **options) -> AggregationOutcome:
    """One-shot aggregation with a fresh (stateless) rule instance."""
    mat = np.asarray(updates, dtype=np.float64)
    if ctx is None:
        ctx = AggContext(bs_ids=np.arange(mat.shape[0]))
    return Aggregator(AggregatorConfig(kind=rule, **options))(mat, ctx)


__all__ = [
    "RULES",
    "AggContext",
    "AggregationError",
    "AggregationOutcome",
    "Aggregator",
    "AggregatorConfig",
    "GlidConfig",
    "OneClassSvmModel",
    "agg_faba",
    "agg_flair",
    "agg_fltrust",
    "agg_foolsgold",
    "agg_glid",
    "agg_krum",
    "agg_mean",
    "agg_median",
    "agg_trimmed_mean",
    "aggregate",
    "fit_one_class_svm",
    "foolsgold_weights",
    "percentile_of",
    "percentile_pair_iqr",
    "percentile_pair_sd",
    "percentile_pair_z",
    "svm_flags",
    "weighted_mean",
]
