"""Declarative experiment configuration.

Configs are nested mappings (YAML or JSON on disk). Every field has a
default; :func:`resolve` fills them in and validates the result, collecting
every violation rather than stopping at the first.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping

import yaml

from .aggregators import RULES, AggregatorConfig, GlidConfig
from .aggregators.glid import ESTIMATORS
from .attacks import ATTACK_KINDS, BaselineAttackConfig


class ConfigError(ValueError):
    def __init__(self, problems: list[str]):
        super().__init__("invalid configuration:\n  " + "\n  ".join(problems))
        self.problems = problems


@dataclass
class DataSection:
    source: str = "synthetic"
    # csv source
    csv_path: str | None = None
    cells: list[int] | None = None
    value_columns: list[int] | None = None
    interval_minutes: int = 10
    # synthetic source
    length: int = 336
    period: int = 24
    noise_std: float = 2.0
    split: float = 0.8


@dataclass
class WindowSection:
    r: int = 6
    s: int = 1
    # None: one day of intervals (the synthetic period, or 1440/interval for csv)
    omega: int | None = None


@dataclass
class ModelSection:
    hidden_dims: list[int] = field(default_factory=lambda: [8])
    activation: str = "tanh"


@dataclass
class TrainSection:
    learning_rate: float = 0.05
    batch_size: int = 64
    local_epochs: int = 2


@dataclass
class FleetSection:
    num_bs: int = 100
    adversary_pct: float = 20.0


@dataclass
class AttackSection:
    kind: str = "none"
    scaling_factor: float = 1000.0
    gaussian_std: float = 1.0
    history_lag: int = 1
    trim_spread: float = 0.5
    trim_jitter: float = 0.01
    zheng_scale: float = 1.0
    eta0: float = 10.0
    fti_iterations: int = 5
    # "zeros", "initial", or an explicit list of D floats
    base_model: Any = "zeros"


@dataclass
class AggregatorSection:
    kind: str = "glid"
    trim_fraction: float = 0.2
    krum_f: int | None = None
    faba_fraction: float = 0.2
    flair_decay: float = 0.9
    flair_sharpness: float = 5.0
    estimator: str = "sd"
    k: float = 3.0
    k_iqr: float = 1.5
    k_z: float = 2.0
    nu: float = 0.2
    bandwidth: float | None = None
    fixed_pair: list[float] | None = None


@dataclass
class SeedSection:
    data: int = 0
    init: int = 0
    round: int = 0
    # order in which updates reach the aggregator
    shuffle: int = 0


@dataclass
class OutputSection:
    dir: str = "runs/default"
    export_flags: bool = False


@dataclass
class ExperimentConfig:
    data: DataSection = field(default_factory=DataSection)
    window: WindowSection = field(default_factory=WindowSection)
    model: ModelSection = field(default_factory=ModelSection)
    train: TrainSection = field(default_factory=TrainSection)
    fleet: FleetSection = field(default_factory=FleetSection)
    rounds: int = 50
    broken_patience: int = 5
    attack: AttackSection = field(default_factory=AttackSection)
    aggregator: AggregatorSection = field(default_factory=AggregatorSection)
    seeds: SeedSection = field(default_factory=SeedSection)
    output: OutputSection = field(default_factory=OutputSection)

    # -------------------------------------------------------- derived

    @property
    def omega(self) -> int:
        if self.window.omega is not None:
            return self.window.omega
        if self.data.source == "synthetic":
            return self.data.period
        return max(1440 // self.data.interval_minutes, self.window.r + 1)

    @property
    def num_adversaries(self) -> int:
        return int(round(self.fleet.adversary_pct / 100.0 * self.fleet.num_bs))

    def aggregator_config(self) -> AggregatorConfig:
        a = self.aggregator
        glid = GlidConfig(
            estimator=a.estimator,
            k=a.k,
            k_iqr=a.k_iqr,
            k_z=a.k_z,
            nu=a.nu,
            bandwidth=a.bandwidth,
            fixed_pair=None if a.fixed_pair is None else tuple(a.fixed_pair),
        )
        return AggregatorConfig(
            kind=a.kind,
            trim_fraction=a.trim_fraction,
            krum_f=a.krum_f,
            faba_fraction=a.faba_fraction,
            flair_decay=a.flair_decay,
            flair_sharpness=a.flair_sharpness,
            glid=glid,
        )

    def baseline_attack_config(self) -> BaselineAttackConfig:
        a = self.attack
        return BaselineAttackConfig(
            scaling_factor=a.scaling_factor,
            gaussian_std=a.gaussian_std,
            history_lag=a.history_lag,
            trim_spread=a.trim_spread,
            trim_jitter=a.trim_jitter,
            zheng_scale=a.zheng_scale,
        )

    def to_dict(self) -> dict:
        return asdict(self)

    def replace(self, **sections) -> "ExperimentConfig":
        """Copy with top-level fields or ``section.field`` keys overridden."""
        data = self.to_dict()
        for key, value in sections.items():
            if "__" in key:
                sec, name = key.split("__", 1)
                data[sec][name] = value
            else:
                data[key] = value
        return resolve(data)


_SECTIONS = {f.name: f.type for f in fields(ExperimentConfig)}
_SECTION_TYPES = {
    "data": DataSection,
    "window": WindowSection,
    "model": ModelSection,
    "train": TrainSection,
    "fleet": FleetSection,
    "attack": AttackSection,
    "aggregator": AggregatorSection,
    "seeds": SeedSection,
    "output": OutputSection,
}


def _build(raw: Mapping, problems: list[str]) -> ExperimentConfig:
    kwargs = {}
    for key, value in raw.items():
        if key in _SECTION_TYPES:
            cls = _SECTION_TYPES[key]
            if value is None:
                value = {}
            if not isinstance(value, Mapping):
                problems.append(f"{key}: expected a mapping")
                continue
            known = {f.name for f in fields(cls)}
            for unknown in sorted(set(value) - known):
                problems.append(f"{key}.{unknown}: unknown field")
            kwargs[key] = cls(**{k: v for k, v in value.items() if k in known})
        elif key in ("rounds", "broken_patience"):
            kwargs[key] = value
        else:
            problems.append(f"{key}: unknown section")
    return ExperimentConfig(**kwargs)


def _validate(cfg: ExperimentConfig, problems: list[str], check_paths: bool) -> None:
    def need(cond: bool, where: str, msg: str):
        if not cond:
            problems.append(f"{where}: {msg}")

    def is_int(x):
        return isinstance(x, int) and not isinstance(x, bool)

    def is_num(x):
        return isinstance(x, (int, float)) and not isinstance(x, bool)

    d = cfg.data
    need(d.source in ("synthetic", "csv"), "data.source", "must be 'synthetic' or 'csv'")
    if d.source == "csv":
        need(bool(d.csv_path), "data.csv_path", "required when data.source is 'csv'")
        if d.csv_path and check_paths:
            need(Path(d.csv_path).is_file(), "data.csv_path", f"file not found: {d.csv_path}")
        if d.cells is not None:
            need(len(d.cells) == cfg.fleet.num_bs, "data.cells", "length must equal fleet.num_bs")
    need(is_int(d.interval_minutes) and d.interval_minutes > 0, "data.interval_minutes", "positive integer")
    need(is_int(d.period) and d.period >= 1, "data.period", "positive integer")
    need(is_int(d.length) and is_int(d.period) and d.length >= 2 * d.period, "data.length", "must be >= 2*period")
    need(is_num(d.noise_std) and d.noise_std >= 0, "data.noise_std", "nonnegative number")
    need(is_num(d.split) and 0 < d.split < 1, "data.split", "must lie in (0, 1)")

    w = cfg.window
    need(is_int(w.r) and w.r >= 1, "window.r", "integer >= 1")
    need(is_int(w.s) and w.s >= 0, "window.s", "integer >= 0")
    if w.omega is not None:
        need(is_int(w.omega) and w.omega >= 1, "window.omega", "positive integer")
    if is_int(w.s) and w.s >= 1 and is_int(w.r):
        try:
            om = cfg.omega
            need(om > w.r, "window.omega", f"must exceed r={w.r} (got {om})")
        except TypeError:
            pass

    m = cfg.model
    need(isinstance(m.hidden_dims, list) and all(is_int(h) and h >= 1 for h in m.hidden_dims),
         "model.hidden_dims", "list of positive integers")
    need(m.activation in ("tanh", "sigmoid", "relu", "identity"), "model.activation",
         "one of tanh, sigmoid, relu, identity")

    t = cfg.train
    need(is_num(t.learning_rate) and t.learning_rate >= 0, "train.learning_rate", "nonnegative number")
    need(is_int(t.batch_size) and t.batch_size >= 1, "train.batch_size", "positive integer")
    need(is_int(t.local_epochs) and t.local_epochs >= 1, "train.local_epochs", "positive integer")

    f = cfg.fleet
    need(is_int(f.num_bs) and f.num_bs >= 2, "fleet.num_bs", "integer >= 2")
    need(is_num(f.adversary_pct) and 0 <= f.adversary_pct <= 50, "fleet.adversary_pct", "must lie in [0, 50]")

    need(is_int(cfg.rounds) and cfg.rounds >= 0, "rounds", "nonnegative integer")
    need(is_int(cfg.broken_patience) and cfg.broken_patience >= 1, "broken_patience", "positive integer")

    a = cfg.attack
    need(a.kind in ATTACK_KINDS, "attack.kind", f"one of {', '.join(ATTACK_KINDS)}")
    need(is_num(a.scaling_factor) and a.scaling_factor != 0, "attack.scaling_factor", "nonzero number")
    need(is_num(a.gaussian_std) and a.gaussian_std >= 0, "attack.gaussian_std", "nonnegative number")
    need(is_int(a.history_lag) and a.history_lag >= 1, "attack.history_lag", "positive integer")
    need(is_num(a.trim_spread) and a.trim_spread >= 0, "attack.trim_spread", "nonnegative number")
    need(is_num(a.eta0) and a.eta0 >= 0, "attack.eta0", "nonnegative number")
    need(is_int(a.fti_iterations) and a.fti_iterations >= 0, "attack.fti_iterations", "nonnegative integer")
    need(a.base_model in ("zeros", "initial") or isinstance(a.base_model, list), "attack.base_model",
         "'zeros', 'initial' or a list of floats")

    g = cfg.aggregator
    need(g.kind in RULES, "aggregator.kind", f"one of {', '.join(RULES)}")
    need(g.estimator in ESTIMATORS, "aggregator.estimator", f"one of {', '.join(ESTIMATORS)}")
    need(is_num(g.trim_fraction) and 0 <= g.trim_fraction < 0.5, "aggregator.trim_fraction", "must lie in [0, 0.5)")
    need(is_num(g.faba_fraction) and 0 <= g.faba_fraction < 1, "aggregator.faba_fraction", "must lie in [0, 1)")
    need(is_num(g.k) and g.k > 0, "aggregator.k", "positive number")
    need(is_num(g.k_z) and g.k_z > 0, "aggregator.k_z", "positive number")
    need(is_num(g.k_iqr) and g.k_iqr >= 0, "aggregator.k_iqr", "nonnegative number")
    need(is_num(g.nu) and 0 < g.nu < 1, "aggregator.nu", "must lie in (0, 1)")
    if g.fixed_pair is not None:
        ok = isinstance(g.fixed_pair, (list, tuple)) and len(g.fixed_pair) == 2 and all(map(is_num, g.fixed_pair))
        need(ok and 0 <= g.fixed_pair[0] < g.fixed_pair[1] <= 100, "aggregator.fixed_pair",
             "[lo, hi] with 0 <= lo < hi <= 100")
    if g.krum_f is not None:
        need(is_int(g.krum_f) and g.krum_f >= 0, "aggregator.krum_f", "nonnegative integer")

    for name in ("data", "init", "round", "shuffle"):
        need(is_int(getattr(cfg.seeds, name)), f"seeds.{name}", "integer")


def resolve(raw: Mapping | None = None, *, check_paths: bool = True) -> ExperimentConfig:
    problems: list[str] = []
    try:
        cfg = _build(dict(raw or {}), problems)
    except TypeError as exc:
        raise ConfigError([str(exc)]) from exc
    _validate(cfg, problems, check_paths)
    if problems:
        raise ConfigError(problems)
    return cfg


def load_config(path, *, check_paths: bool = True) -> ExperimentConfig:
    text = Path(path).read_text(encoding="utf-8")
    raw = yaml.safe_load(text) if text.strip() else {}
    if raw is not None and not isinstance(raw, Mapping):
        raise ConfigError(["top level: expected a mapping"])
    return resolve(raw, check_paths=check_paths)


def dump_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)


def config_json(cfg: ExperimentConfig) -> str:
    return json.dumps(cfg.to_dict(), indent=2, sort_keys=True)
