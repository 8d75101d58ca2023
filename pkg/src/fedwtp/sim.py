"""The federated training loop: synchronize, train locally, aggregate.

Every BS id ``0..N-1`` owns one traffic series. A seeded subset of ids is
adversarial: under FTI those ids are fake BSs that never train, under the
baseline attacks they are compromised genuine BSs. Each round the server
sees a shuffled list of bare parameter vectors plus their bs_ids; the truth
tags stay in the simulator and are only used to score the flags afterwards.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import attacks as atk
from .aggregators import AggContext, Aggregator
from .config import ExperimentConfig
from .data import WindowConfig, WindowedDataset, build_windows, generate_synthetic, load_grid_csv, list_cells
from .metrics import CAP, DetectionReport, RoundRecord, confusion_counts, report_from_counts
from .model import ModelArch, TrainConfig, evaluate, init_model, local_train
from .params import DimensionError, ParamVector


class Truth(enum.Enum):
    BENIGN = "benign"
    FAKE = "fake"
    COMPROMISED = "compromised"


class RoundError(RuntimeError):
    """An attack or aggregation failure, tagged with the round it happened in."""

    def __init__(self, round: int, cause: BaseException):
        super().__init__(f"round {round}: {type(cause).__name__}: {cause}")
        self.round = round
        self.cause = cause


@dataclass(frozen=True)
class LocalUpdate:
    bs_id: int
    round: int
    params: ParamVector
    truth: Truth


@dataclass(frozen=True)
class FleetConfig:
    """Which bs_ids are adversarial and in what role."""

    num_bs: int
    adversary_ids: tuple[int, ...] = ()
    attack: str = "none"

    def __post_init__(self):
        if self.attack not in atk.ATTACK_KINDS:
            raise ValueError(f"unknown attack {self.attack!r}")
        if any(not 0 <= i < self.num_bs for i in self.adversary_ids):
            raise ValueError("adversary ids outside the fleet")
        if len(set(self.adversary_ids)) != len(self.adversary_ids):
            raise ValueError("duplicate adversary ids")
        if self.attack == "none" and self.adversary_ids:
            object.__setattr__(self, "adversary_ids", ())

    @property
    def m_fake(self) -> int:
        return len(self.adversary_ids) if self.attack in atk.FAKE_CLIENT_ATTACKS else 0

    @property
    def n_compromised(self) -> int:
        return 0 if self.attack in atk.FAKE_CLIENT_ATTACKS else len(self.adversary_ids)

    @property
    def n_benign(self) -> int:
        return self.num_bs - len(self.adversary_ids)

    def truth(self, bs_id: int) -> Truth:
        if bs_id not in self.adversary_ids:
            return Truth.BENIGN
        return Truth.FAKE if self.attack in atk.FAKE_CLIENT_ATTACKS else Truth.COMPROMISED

    def truth_mask(self) -> np.ndarray:
        """Boolean malicious mask in bs_id order."""
        mask = np.zeros(self.num_bs, dtype=bool)
        mask[list(self.adversary_ids)] = True
        return mask

    @property
    def benign_ids(self) -> list[int]:
        adv = set(self.adversary_ids)
        return [i for i in range(self.num_bs) if i not in adv]


@dataclass(frozen=True)
class RoundContext:
    round: int
    global_model: ParamVector
    initial_model: ParamVector
    history: tuple[ParamVector, ...]

    @property
    def previous_global(self) -> ParamVector | None:
        return self.history[self.round - 1] if self.round >= 1 else None

    def knowledge(self) -> atk.GlobalKnowledge:
        return atk.GlobalKnowledge(self.round, self.initial_model, self.global_model, self.history)


@dataclass
class AttackPlan:
    kind: str = "none"
    baseline: atk.BaselineAttackConfig = field(default_factory=atk.BaselineAttackConfig)
    fti: atk.FtiConfig | None = None


@dataclass
class Federation:
    """Everything that stays fixed across rounds."""

    arch: ModelArch
    train_sets: Sequence[WindowedDataset]
    test_sets: Sequence[WindowedDataset]
    fleet: FleetConfig
    train_cfg: TrainConfig
    plan: AttackPlan
    round_seed: int = 0
    shuffle_seed: int = 0


@dataclass
class RoundOutput:
    new_global: ParamVector
    record: RoundRecord
    fti_trace: list[tuple[float, float]] = field(default_factory=list)


# ------------------------------------------------------------- seeding


def _derived_seed(*parts: int) -> int:
    return int(np.random.SeedSequence([int(p) & 0xFFFFFFFF for p in parts]).generate_state(1)[0])


# tags keep the derived streams apart
_TRAIN, _SERVER, _RANDOM, _TRIM, _SHUFFLE, _ROLES = range(1, 7)


def _train_cfg(base: TrainConfig, seed: int) -> TrainConfig:
    return TrainConfig(base.learning_rate, base.batch_size, base.local_epochs, seed)


# ----------------------------------------------------------- one round


def _adversarial_updates(
    fed: Federation, ctx: RoundContext, adversaries: list[int], honest: dict[int, ParamVector]
) -> tuple[dict[int, ParamVector], list[tuple[float, float]], float | None]:
    plan, t, theta = fed.plan, ctx.round, ctx.global_model
    cfg = plan.baseline
    out: dict[int, ParamVector] = {}
    trace: list[tuple[float, float]] = []
    eta = None
    if not adversaries:
        return out, trace, eta
    if plan.kind == "fti":
        res = atk.fti_craft(theta, plan.fti)
        trace, eta = res.trace, res.eta_final
        for i in adversaries:
            out[i] = res.params.copy()
    elif plan.kind == "trim":
        rng = np.random.default_rng(_derived_seed(fed.round_seed, _TRIM, t))
        crafted = atk.trim_attack([honest[i] for i in adversaries], theta, cfg, len(adversaries), rng)
        out.update(zip(adversaries, crafted))
    elif plan.kind == "zheng":
        trainers = [
            lambda th, i=i: local_train(
                fed.arch, th, fed.train_sets[i], _train_cfg(fed.train_cfg, _derived_seed(fed.round_seed, _TRAIN, t, i))
            )
            for i in adversaries
        ]
        crafted = atk.zheng_attack(trainers, theta, ctx.previous_global, cfg)
        out.update(zip(adversaries, crafted))
    elif plan.kind == "history":
        value = atk.history_attack(ctx.knowledge(), cfg)
        out.update((i, value.copy()) for i in adversaries)
    elif plan.kind == "random":
        for i in adversaries:
            out[i] = atk.random_attack(theta.size, cfg, _derived_seed(fed.round_seed, _RANDOM, t, i))
    elif plan.kind == "mpaf":
        value = atk.mpaf_attack(ctx.initial_model, theta, cfg)
        out.update((i, value.copy()) for i in adversaries)
    else:
        raise ValueError(f"unknown attack {plan.kind!r}")
    for i, v in out.items():
        if v.shape != theta.shape:
            raise DimensionError(f"attack produced {v.size} parameters for bs {i}, expected {theta.size}")
    return out, trace, eta


def collect_updates(fed: Federation, ctx: RoundContext) -> tuple[list[LocalUpdate], list[tuple[float, float]], float | None]:
    """Steps I-II: every BS receives the global model and returns its local model."""
    t, theta = ctx.round, ctx.global_model
    fleet = fed.fleet
    adversaries = sorted(fleet.adversary_ids)
    trains = [i for i in range(fleet.num_bs) if fleet.truth(i) is not Truth.FAKE]
    honest: dict[int, ParamVector] = {}
    # only Trim's compromised BSs train up front (Zheng trains inside the attack)
    for i in trains:
        if fleet.truth(i) is Truth.COMPROMISED and fed.plan.kind != "trim":
            continue
        seed = _derived_seed(fed.round_seed, _TRAIN, t, i)
        honest[i] = local_train(fed.arch, theta, fed.train_sets[i], _train_cfg(fed.train_cfg, seed))
    try:
        crafted, trace, eta = _adversarial_updates(fed, ctx, adversaries, honest)
    except Exception as exc:
        raise RoundError(t, exc) from exc
    updates = []
    for i in range(fleet.num_bs):
        truth = fleet.truth(i)
        params = honest[i] if truth is Truth.BENIGN else crafted[i]
        updates.append(LocalUpdate(i, t, params, truth))
    return updates, trace, eta


def present(updates: Sequence[LocalUpdate], shuffle_seed: int, round: int) -> tuple[np.ndarray, np.ndarray]:
    """Strip truth tags and shuffle: returns ``(bs_ids, matrix)`` in presentation order."""
    order = np.random.default_rng(_derived_seed(shuffle_seed, _SHUFFLE, round)).permutation(len(updates))
    ids = np.array([updates[k].bs_id for k in order], dtype=np.int64)
    mat = np.vstack([updates[k].params for k in order])
    return ids, mat


def server_update(fed: Federation, ctx: RoundContext) -> ParamVector:
    """The server's own fine-tuning on its root data (lowest-id benign BS's train split)."""
    root = fed.fleet.benign_ids[0]
    seed = _derived_seed(fed.round_seed, _SERVER, ctx.round)
    return local_train(fed.arch, ctx.global_model, fed.train_sets[root], _train_cfg(fed.train_cfg, seed))


def run_round(fed: Federation, ctx: RoundContext, aggregator: Aggregator) -> RoundOutput:
    updates, trace, eta = collect_updates(fed, ctx)
    ids, mat = present(updates, fed.shuffle_seed, ctx.round)
    if mat.shape != (fed.fleet.num_bs, ctx.global_model.size):
        raise DimensionError(f"presented {mat.shape}, expected ({fed.fleet.num_bs}, {ctx.global_model.size})")
    agg_ctx = AggContext(
        bs_ids=ids,
        round=ctx.round,
        global_model=ctx.global_model,
        previous_global=ctx.previous_global,
        server_update=server_update(fed, ctx) if aggregator.cfg.kind == "fltrust" else None,
        expected_malicious=len(fed.fleet.adversary_ids),
    )
    try:
        outcome = aggregator(mat, agg_ctx)
    except Exception as exc:
        raise RoundError(ctx.round, exc) from exc
    new_global = np.asarray(outcome.global_model, dtype=np.float64)
    flags = np.empty_like(outcome.flags)
    flags[:, ids] = outcome.flags
    mae, mse = evaluate(fed.arch, new_global, fed.test_sets)
    return RoundOutput(new_global, RoundRecord(ctx.round, mae, mse, False, eta, flags), trace)


# --------------------------------------------------------- experiments


@dataclass
class ExperimentResult:
    records: list[RoundRecord]
    detection: DetectionReport | None
    initial_model: ParamVector
    final_model: ParamVector
    fleet: FleetConfig
    # (round, iteration, eta, dist) for FTI runs
    fti_trace: list[tuple[int, int, float, float]] = field(default_factory=list)

    @property
    def final_mae(self) -> float:
        return self.records[-1].mae_capped if self.records else float("nan")

    @property
    def final_mse(self) -> float:
        return self.records[-1].mse_capped if self.records else float("nan")


def load_series(cfg: ExperimentConfig):
    d = cfg.data
    n = cfg.fleet.num_bs
    if d.source == "synthetic":
        return generate_synthetic(n, d.length, d.period, d.noise_std, cfg.seeds.data, interval_minutes=d.interval_minutes)
    cells = d.cells
    if cells is None:
        available = list_cells(d.csv_path, d.value_columns)
        if len(available) < n:
            raise ValueError(f"{d.csv_path} holds {len(available)} cells, fleet needs {n}")
        cells = available[:n]
    return load_grid_csv(d.csv_path, cells, d.interval_minutes, d.value_columns)


def prepare_data(cfg: ExperimentConfig):
    """``(arch, train_sets, test_sets)`` indexed by bs_id."""
    window = WindowConfig(cfg.window.r, cfg.window.s, cfg.omega)
    series = load_series(cfg)
    splits = [build_windows(s, window, cfg.data.split) for s in series]
    arch = ModelArch(window.input_dim, tuple(cfg.model.hidden_dims), cfg.model.activation)
    return arch, [tr for tr, _ in splits], [te for _, te in splits]


def choose_adversaries(num_bs: int, count: int, seed: int) -> tuple[int, ...]:
    rng = np.random.default_rng(_derived_seed(seed, _ROLES))
    return tuple(sorted(int(i) for i in rng.choice(num_bs, size=count, replace=False)))


def _base_model(cfg: ExperimentConfig, initial: ParamVector) -> ParamVector:
    choice = cfg.attack.base_model
    if isinstance(choice, str):
        return np.zeros_like(initial) if choice == "zeros" else initial.copy()
    base = np.asarray(choice, dtype=np.float64)
    if base.shape != initial.shape:
        raise DimensionError(f"attack.base_model has {base.size} values, model has {initial.size}")
    return base


def build_federation(cfg: ExperimentConfig, data=None) -> tuple[Federation, ParamVector]:
    arch, train_sets, test_sets = data if data is not None else prepare_data(cfg)
    kind = cfg.attack.kind
    count = cfg.num_adversaries if kind != "none" else 0
    if count >= cfg.fleet.num_bs:
        raise ValueError("fleet has no benign BS")
    fleet = FleetConfig(cfg.fleet.num_bs, choose_adversaries(cfg.fleet.num_bs, count, cfg.seeds.data), kind)
    initial = init_model(arch, cfg.seeds.init)
    plan = AttackPlan(kind, cfg.baseline_attack_config())
    if kind == "fti":
        plan.fti = atk.FtiConfig(_base_model(cfg, initial), cfg.attack.eta0, cfg.attack.fti_iterations)
    train_cfg = TrainConfig(cfg.train.learning_rate, cfg.train.batch_size, cfg.train.local_epochs)
    fed = Federation(arch, train_sets, test_sets, fleet, train_cfg, plan, cfg.seeds.round, cfg.seeds.shuffle)
    return fed, initial


def run_federation(
    fed: Federation,
    initial: ParamVector,
    aggregator: Aggregator,
    rounds: int,
    broken_patience: int = 5,
    on_round: Callable[[RoundRecord], None] | None = None,
) -> ExperimentResult:
    history: list[ParamVector] = [np.array(initial, dtype=np.float64)]
    records: list[RoundRecord] = []
    trace_rows: list[tuple[int, int, float, float]] = []
    counts = None
    streak = 0
    truth = fed.fleet.truth_mask()
    for t in range(rounds):
        ctx = RoundContext(t, history[-1], history[0], tuple(history))
        out = run_round(fed, ctx, aggregator)
        rec = out.record
        c = confusion_counts(rec.flags, truth)
        counts = c if counts is None else counts + c
        # broken: the cap has held for the last broken_patience rounds
        streak = streak + 1 if rec.mae_raw >= CAP else 0
        rec.broken = streak >= broken_patience
        trace_rows += [(t, k, eta, dist) for k, (eta, dist) in enumerate(out.fti_trace)]
        records.append(rec)
        history.append(out.new_global)
        if on_round is not None:
            on_round(rec)
    detection = report_from_counts(counts) if counts is not None else None
    return ExperimentResult(records, detection, history[0], history[-1], fed.fleet, trace_rows)


def run_experiment(cfg: ExperimentConfig, data=None, on_round=None) -> ExperimentResult:
    """Run ``cfg.rounds`` rounds from the seeded initial model.

    ``data`` may carry a precomputed ``prepare_data(cfg)`` result so sweeps
    over attacks and rules do not rebuild the windows.
    """
    fed, initial = build_federation(cfg, data)
    return run_federation(fed, initial, Aggregator(cfg.aggregator_config()), cfg.rounds, cfg.broken_patience, on_round)
