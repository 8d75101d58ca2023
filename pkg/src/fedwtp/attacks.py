"""Malicious update crafting.

Every attack works on full models (not deltas). Arithmetic relative to the
current global model is done internally where an attack is naturally phrased
as an update.

Knowledge is passed explicitly: :class:`GlobalKnowledge` holds only what a
fake BS can observe (initial and synchronized global models), and
:class:`CompromisedKnowledge` adds the compromised BSs' own data and honest
updates. Benign updates never reach an attack.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .params import ParamVector, affine_combine, as_params, l2_distance, stack


class AttackConfigError(ValueError):
    pass


@dataclass(frozen=True)
class GlobalKnowledge:
    round: int
    initial: ParamVector
    current: ParamVector
    # globals received so far, history[t] is the global at round t
    history: tuple[ParamVector, ...] = ()

    def past(self, lag: int) -> ParamVector:
        t = self.round - lag
        if t < 0 or t >= len(self.history):
            return self.initial
        return self.history[t]

    @property
    def previous(self) -> ParamVector | None:
        return self.history[self.round - 1] if self.round >= 1 and len(self.history) >= self.round else None


@dataclass(frozen=True)
class CompromisedKnowledge(GlobalKnowledge):
    # honest local models of the compromised BSs only
    own_updates: tuple[ParamVector, ...] = ()
    # callables that fine-tune theta on one compromised BS's private data
    own_trainers: tuple[Callable[[ParamVector], ParamVector], ...] = ()


# ---------------------------------------------------------------- FTI


@dataclass(frozen=True)
class FtiConfig:
    base_model: ParamVector | None = None
    eta0: float = 10.0
    iterations: int = 5

    def __post_init__(self):
        if self.eta0 < 0:
            raise AttackConfigError("eta0 must be nonnegative")
        if self.iterations < 0:
            raise AttackConfigError("iterations must be nonnegative")


@dataclass
class FtiState:
    step: float
    eta: float
    prev_dist: float = -1.0
    dist: float = 0.0


@dataclass(frozen=True)
class FtiResult:
    params: ParamVector
    eta_final: float
    trace: list[tuple[float, float]] = field(default_factory=list)
    step_final: float = 0.0


def fti_craft(global_model: ParamVector, cfg: FtiConfig) -> FtiResult:
    """Blend the base model and the global model with a distance-driven eta search.

    Each iteration builds ``eta*base + (1-eta)*global``, measures its L2
    distance to the global model, moves eta up by half the current step if
    that distance grew (down otherwise) and halves the step. The candidate
    of the last iteration is shared by every fake BS; ``trace`` holds the
    ``(eta, dist)`` used in each iteration. With zero iterations the
    candidate is built once with ``eta0``.
    """
    if cfg.base_model is None:
        raise AttackConfigError("FTI needs a base model")
    base = np.asarray(cfg.base_model, dtype=np.float64)
    theta = np.asarray(global_model, dtype=np.float64)
    state = FtiState(step=cfg.eta0, eta=cfg.eta0)
    candidate = affine_combine(state.eta, base, 1.0 - state.eta, theta)
    trace = []
    for _ in range(cfg.iterations):
        candidate = affine_combine(state.eta, base, 1.0 - state.eta, theta)
        state.dist = l2_distance(candidate, theta)
        trace.append((state.eta, state.dist))
        if state.prev_dist < state.dist:
            state.eta += state.step / 2
        else:
            state.eta -= state.step / 2
        state.step /= 2
        state.prev_dist = state.dist
    return FtiResult(candidate, state.eta, trace, state.step)


# ---------------------------------------------------------- baselines


@dataclass(frozen=True)
class BaselineAttackConfig:
    scaling_factor: float = 1000.0
    gaussian_std: float = 1.0
    history_lag: int = 1
    trim_spread: float = 0.5
    trim_jitter: float = 0.01
    zheng_scale: float = 1.0

    def __post_init__(self):
        if self.scaling_factor == 0:
            raise AttackConfigError("scaling_factor must be nonzero")
        if self.gaussian_std < 0 or self.history_lag < 1 or self.trim_spread < 0:
            raise AttackConfigError("invalid baseline attack parameters")


def trim_attack(
    known_updates: Sequence[ParamVector],
    global_model: ParamVector,
    cfg: BaselineAttackConfig,
    count: int = 1,
    rng: np.random.Generator | None = None,
) -> list[ParamVector]:
    """Push every coordinate just past the extreme opposite the benign movement.

    Our reading of the directed-dimension Trim attack: the movement sign is
    estimated from the compromised BSs' own honest models (ties count as
    positive); the malicious value sits ``trim_spread`` times the extreme's
    magnitude beyond it. Copies get independent uniform jitter of
    ``trim_jitter`` times that displacement.
    """
    known = stack(known_updates)
    theta = np.asarray(global_model, dtype=np.float64)
    direction = np.where(known.mean(axis=0) - theta >= 0, 1.0, -1.0)
    lo, hi = known.min(axis=0), known.max(axis=0)
    displacement = np.where(direction > 0, np.abs(lo), np.abs(hi)) * cfg.trim_spread
    target = np.where(direction > 0, lo - displacement, hi + displacement)
    rng = rng if rng is not None else np.random.default_rng(0)
    out = []
    for _ in range(count):
        jitter = rng.uniform(-1.0, 1.0, size=theta.size) * cfg.trim_jitter * displacement
        out.append(as_params(target + jitter))
    return out


def history_attack(knowledge: GlobalKnowledge, cfg: BaselineAttackConfig) -> ParamVector:
    """``theta_t + lambda * (theta_{t-h} - theta_t)``, using the initial model before round h."""
    theta = knowledge.current
    return affine_combine(1.0 - cfg.scaling_factor, theta, cfg.scaling_factor, knowledge.past(cfg.history_lag))


def random_attack(dim: int, cfg: BaselineAttackConfig, seed) -> ParamVector:
    rng = np.random.default_rng(seed)
    if cfg.gaussian_std == 0:
        return np.zeros(dim)
    return cfg.scaling_factor * rng.normal(0.0, cfg.gaussian_std, size=dim)


def mpaf_attack(initial: ParamVector, global_model: ParamVector, cfg: BaselineAttackConfig) -> ParamVector:
    """Drag toward the initial model: ``theta_t + lambda * (theta_0 - theta_t)``."""
    return affine_combine(1.0 - cfg.scaling_factor, global_model, cfg.scaling_factor, initial)


def zheng_attack(
    own_trainers: Sequence[Callable[[ParamVector], ParamVector]],
    global_model: ParamVector,
    previous_global: ParamVector | None,
    cfg: BaselineAttackConfig,
) -> list[ParamVector]:
    """Move against both the local descent direction and the recent global drift.

    Our reading of the error-maximizing inversion: with the honest
    fine-tuning delta ``d_i`` and drift ``D = theta_t - theta_{t-1}`` (zero
    in round 0) the fake model is ``theta_t - zheng_scale * (d_i + D)``.
    """
    theta = np.asarray(global_model, dtype=np.float64)
    drift = np.zeros_like(theta) if previous_global is None else theta - previous_global
    out = []
    for train in own_trainers:
        delta = train(theta) - theta
        out.append(as_params(theta - cfg.zheng_scale * (delta + drift)))
    return out


ATTACK_KINDS = ("none", "trim", "history", "random", "mpaf", "zheng", "fti")
# attacks run by fake BSs that own no data; the rest control genuine BSs
FAKE_CLIENT_ATTACKS = frozenset({"fti"})
