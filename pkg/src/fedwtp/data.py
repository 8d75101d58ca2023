"""Traffic series ingestion, synthetic generation and sliding-window samples."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


class IngestionError(Exception):
    """Base class for grid CSV loading failures."""


class UnreadableFileError(IngestionError):
    pass


class MalformedRowError(IngestionError):
    def __init__(self, path, line_no: int, reason: str):
        super().__init__(f"{path}:{line_no}: {reason}")
        self.line_no = line_no


class EmptySelectionError(IngestionError):
    pass


class InsufficientHistoryError(ValueError):
    pass


@dataclass(frozen=True)
class TrafficSeries:
    bs_id: int
    values: np.ndarray
    interval_minutes: int = 10

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 1 or vals.size < 2:
            raise ValueError("a traffic series needs at least two intervals")
        if not np.all(np.isfinite(vals)) or np.any(vals < 0):
            raise ValueError(f"series {self.bs_id} has negative or non-finite values")
        if self.interval_minutes <= 0:
            raise ValueError("interval_minutes must be positive")
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class WindowConfig:
    """Lag structure: ``r`` recent lags plus ``s`` seasonal lags spaced ``omega`` apart."""

    r: int = 6
    s: int = 1
    omega: int = 144

    def __post_init__(self):
        if self.r < 1 or self.s < 0:
            raise ValueError("need r >= 1 and s >= 0")
        if self.s >= 1 and self.omega <= self.r:
            raise ValueError("omega must exceed r when seasonal lags are used")

    @property
    def input_dim(self) -> int:
        return self.r + self.s

    @property
    def first_target(self) -> int:
        # 0-based index of the earliest target with its full lag history
        return max(self.r, self.s * self.omega)


@dataclass(frozen=True)
class SamplePair:
    input: np.ndarray
    target: float


@dataclass
class WindowedDataset:
    """Normalized sample pairs for one BS, stored as arrays.

    ``inputs`` has shape ``(z, r + s)``; ``targets`` has shape ``(z,)``. Raw
    values are recovered as ``normalized * scale + offset``.
    """

    bs_id: int
    inputs: np.ndarray
    targets: np.ndarray
    scale: float = 1.0
    offset: float = 0.0
    target_index: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))

    def __len__(self) -> int:
        return self.targets.size

    @property
    def normalization(self) -> tuple[float, float]:
        return self.scale, self.offset

    @property
    def pairs(self) -> list[SamplePair]:
        return [SamplePair(x.copy(), float(y)) for x, y in zip(self.inputs, self.targets)]

    def denormalize(self, x):
        return np.asarray(x) * self.scale + self.offset


def _parse_number(token: str, path, line_no: int) -> float:
    token = token.strip()
    if token == "":
        return 0.0
    try:
        value = float(token)
    except ValueError:
        raise MalformedRowError(path, line_no, f"non-numeric field {token!r}") from None
    if not math.isfinite(value):
        raise MalformedRowError(path, line_no, f"non-finite field {token!r}")
    return value


def _read_rows(path, value_columns: Sequence[int] | None):
    """Yield ``(cell_id, timestamp_ms, activity)`` per data line."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise UnreadableFileError(f"cannot read {path}: {exc}") from exc
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        sep = "\t" if "\t" in line else ","
        fields = line.split(sep)
        if len(fields) < 3:
            raise MalformedRowError(path, line_no, f"expected >= 3 columns, got {len(fields)}")
        try:
            cell = int(fields[0].strip())
            ts = int(float(fields[1].strip()))
        except ValueError:
            if line_no == 1:  # header row
                continue
            raise MalformedRowError(path, line_no, "cell id / timestamp not numeric") from None
        raw_values = fields[2:]
        if value_columns is None:
            chosen = raw_values
        else:
            try:
                chosen = [raw_values[c] for c in value_columns]
            except IndexError:
                raise MalformedRowError(
                    path, line_no, f"value column out of range (row has {len(raw_values)})"
                ) from None
        activity = sum(_parse_number(tok, path, line_no) for tok in chosen)
        yield cell, ts, activity


def list_cells(path, value_columns: Sequence[int] | None = None) -> list[int]:
    return sorted({cell for cell, _, _ in _read_rows(path, value_columns)})


def load_grid_csv(
    path,
    selected_cells: Iterable[int],
    interval_minutes: int = 10,
    value_columns: Sequence[int] | None = None,
) -> list[TrafficSeries]:
    """Bucket grid-cell activity records into fixed-length intervals.

    Rows are ``cell_id, timestamp_ms, value...`` separated by tabs or commas.
    Activity of the chosen value columns (indices counted after the
    timestamp; default all) is summed per bucket. Buckets are aligned on the
    earliest timestamp in the file and missing buckets are zero.
    """
    selected = sorted(set(int(c) for c in selected_cells))
    if not selected:
        raise EmptySelectionError("no cells selected")
    if interval_minutes <= 0:
        raise ValueError("interval_minutes must be positive")
    rows = list(_read_rows(path, value_columns))
    if not rows:
        raise EmptySelectionError(f"{path} contains no data rows")
    bucket_ms = interval_minutes * 60_000
    t0 = min(ts for _, ts, _ in rows)
    n_buckets = max((ts - t0) // bucket_ms for _, ts, _ in rows) + 1
    n_buckets = max(n_buckets, 2)
    index = {cell: k for k, cell in enumerate(selected)}
    grid = np.zeros((len(selected), n_buckets))
    seen = set()
    # accumulate with fsum per bucket so row order cannot change the result
    contributions: dict[tuple[int, int], list[float]] = {}
    for cell, ts, activity in rows:
        k = index.get(cell)
        if k is None:
            continue
        seen.add(cell)
        contributions.setdefault((k, (ts - t0) // bucket_ms), []).append(activity)
    for (k, b), vals in contributions.items():
        grid[k, b] = math.fsum(vals)
    missing = [c for c in selected if c not in seen]
    if missing:
        raise EmptySelectionError(f"selected cells absent from {path}: {missing[:10]}")
    np.clip(grid, 0.0, None, out=grid)
    return [TrafficSeries(cell, grid[index[cell]], interval_minutes) for cell in selected]


def generate_synthetic(
    count: int,
    length: int,
    period: int,
    noise_std: float,
    seed: int,
    *,
    base_range: tuple[float, float] = (20.0, 100.0),
    amp_range: tuple[float, float] = (0.3, 0.9),
    interval_minutes: int = 10,
) -> list[TrafficSeries]:
    """Diurnal-like load: ``base + amp*sin(2*pi*t/period + phase) + noise``, clamped at 0.

    ``amp_range`` is relative to each series' base load.
    """
    if count < 1 or period < 1 or length < 2 * period:
        raise ValueError("need count >= 1, period >= 1 and length >= 2*period")
    if noise_std < 0:
        raise ValueError("noise_std must be nonnegative")
    rng = np.random.default_rng(seed)
    t = np.arange(length, dtype=np.float64)
    out = []
    for i in range(count):
        base = rng.uniform(*base_range)
        amp = rng.uniform(*amp_range) * base
        phase = rng.uniform(0.0, 2 * np.pi)
        noise = rng.normal(0.0, noise_std, size=length) if noise_std > 0 else np.zeros(length)
        values = base + amp * np.sin(2 * np.pi * t / period + phase) + noise
        out.append(TrafficSeries(i, np.clip(values, 0.0, None), interval_minutes))
    return out


def window_pairs(values, cfg: WindowConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Raw ``(inputs, targets, target_index)`` for every target with full lag history.

    Inputs hold the ``r`` most recent lags (newest first) followed by the
    ``s`` seasonal lags ``omega, 2*omega, ...``.
    """
    u = np.asarray(values, dtype=np.float64)
    targets_idx = np.arange(cfg.first_target, u.size)
    lags = [m for m in range(1, cfg.r + 1)] + [cfg.omega * j for j in range(1, cfg.s + 1)]
    if targets_idx.size == 0:
        return np.zeros((0, len(lags))), np.zeros(0), targets_idx
    inputs = np.stack([u[targets_idx - lag] for lag in lags], axis=1)
    return inputs, u[targets_idx], targets_idx


def build_windows(
    series: TrafficSeries, cfg: WindowConfig, split: float = 0.8
) -> tuple[WindowedDataset, WindowedDataset]:
    """One-step-ahead sample pairs with a chronological train/test split.

    Min-max normalization is fitted on every raw value the train pairs touch
    and applied to both splits.
    """
    if not 0.0 < split < 1.0:
        raise ValueError("split must lie in (0, 1)")
    u = series.values
    raw_inputs, raw_targets, targets_idx = window_pairs(u, cfg)
    z = targets_idx.size
    n_train = int(math.floor(split * z))
    if z < 2 or n_train < 1 or n_train >= z:
        raise InsufficientHistoryError(
            f"series {series.bs_id}: {u.size} values give {z} pairs, too few for the lag structure"
        )
    last_train_target = targets_idx[n_train - 1]
    fit_values = u[: last_train_target + 1]
    lo, hi = float(fit_values.min()), float(fit_values.max())
    scale = hi - lo if hi > lo else 1.0
    inputs = (raw_inputs - lo) / scale
    targets = (raw_targets - lo) / scale

    def part(sl):
        return WindowedDataset(
            series.bs_id, inputs[sl].copy(), targets[sl].copy(), scale, lo, targets_idx[sl].copy()
        )

    return part(slice(0, n_train)), part(slice(n_train, z))
