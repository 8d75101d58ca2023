"""Reported metrics, detection rates and on-disk run records."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
from contextlib import contextmanager
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import __version__

CAP = 100.0

ROUNDS_COLUMNS = ["round", "mae_raw", "mse_raw", "mae_capped", "mse_capped", "broken", "eta_final"]
DETECTION_COLUMNS = ["dimension", "fp", "fn", "tp", "tn", "fpr", "fnr"]
TABLE_ATTACKS = ("none", "trim", "history", "random", "mpaf", "zheng", "fti")
TABLE_ATTACK_LABELS = {
    "none": "NO",
    "trim": "Trim",
    "history": "History",
    "random": "Random",
    "mpaf": "MPAF",
    "zheng": "Zheng",
    "fti": "FTI",
}


def cap_metric(x: float) -> float:
    return min(float(x), CAP)


@dataclass
class RoundRecord:
    round: int
    mae_raw: float
    mse_raw: float
    broken: bool = False
    eta_final: float | None = None
    # flags[d, b]: dimension d of BS b (bs_id order) flagged; not written to rounds.csv
    flags: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def mae_capped(self) -> float:
        return cap_metric(self.mae_raw)

    @property
    def mse_capped(self) -> float:
        return cap_metric(self.mse_raw)

    @property
    def flags_summary(self) -> np.ndarray | None:
        """Number of flagged dimensions per BS."""
        return None if self.flags is None else self.flags.sum(axis=0)

    def row(self) -> list[str]:
        return [
            str(self.round),
            _fmt(self.mae_raw),
            _fmt(self.mse_raw),
            _fmt(self.mae_capped),
            _fmt(self.mse_capped),
            str(int(self.broken)),
            "" if self.eta_final is None else _fmt(self.eta_final),
        ]


def _fmt(x: float) -> str:
    return repr(float(x))


@dataclass
class DetectionReport:
    fpr: float | None
    fnr: float | None
    # rows of (fp, fn, tp, tn) per dimension
    per_dimension: np.ndarray


def confusion_counts(flags: np.ndarray, truth: Sequence[bool]) -> np.ndarray:
    """``(D, 4)`` counts of (fp, fn, tp, tn); ``truth`` is True for malicious BSs."""
    flags = np.asarray(flags, dtype=bool)
    positive = np.asarray(truth, dtype=bool)
    if flags.ndim != 2 or flags.shape[1] != positive.size:
        raise ValueError(f"flag matrix {flags.shape} does not match fleet of {positive.size}")
    fp = np.sum(flags & ~positive, axis=1)
    fn = np.sum(~flags & positive, axis=1)
    tp = np.sum(flags & positive, axis=1)
    tn = np.sum(~flags & ~positive, axis=1)
    return np.stack([fp, fn, tp, tn], axis=1)


def report_from_counts(counts: np.ndarray) -> DetectionReport:
    counts = np.asarray(counts)
    fp, fn, tp, tn = counts.T
    neg, pos = fp + tn, fn + tp
    fpr = float(np.mean(fp[neg > 0] / neg[neg > 0])) if np.any(neg > 0) else None
    fnr = float(np.mean(fn[pos > 0] / pos[pos > 0])) if np.any(pos > 0) else None
    return DetectionReport(fpr, fnr, counts)


def detection_metrics(flags: np.ndarray, truth: Sequence[bool]) -> DetectionReport:
    """Per-dimension FPR/FNR averaged over dimensions with a defined rate."""
    return report_from_counts(confusion_counts(flags, truth))


# ------------------------------------------------------------ persistence


def config_hash(config: Mapping) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def rounds_csv(records: Iterable[RoundRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(ROUNDS_COLUMNS)
    for rec in records:
        writer.writerow(rec.row())
    return buf.getvalue()


def detection_csv(report: DetectionReport | None) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(DETECTION_COLUMNS)
    if report is not None:
        for d, (fp, fn, tp, tn) in enumerate(np.asarray(report.per_dimension, dtype=int)):
            fpr = fp / (fp + tn) if fp + tn else None
            fnr = fn / (fn + tp) if fn + tp else None
            writer.writerow([d, fp, fn, tp, tn, _opt(fpr), _opt(fnr)])
        tot = np.asarray(report.per_dimension, dtype=int).sum(axis=0) if len(report.per_dimension) else [0] * 4
        writer.writerow(["mean", *[int(c) for c in tot], _opt(report.fpr), _opt(report.fnr)])
    return buf.getvalue()


def _opt(x) -> str:
    return "" if x is None else _fmt(x)


class OutputLockedError(RuntimeError):
    pass


@contextmanager
def _writer_lock(out_dir: Path):
    lock = out_dir / ".lock"
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise OutputLockedError(f"{out_dir} is being written by another process") from None
    try:
        os.close(fd)
        yield
    finally:
        lock.unlink(missing_ok=True)


def persist_run(
    records: Sequence[RoundRecord],
    detection: DetectionReport | None,
    config: Mapping,
    out_dir,
    extra_files: Mapping[str, str] | None = None,
) -> Path:
    """Write rounds.csv, detection.csv, config.json and manifest.json.

    The directory is created and locked before anything is written, so an
    unwritable location fails without partial output.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    if not os.access(out, os.W_OK):
        raise PermissionError(f"output directory {out} is not writable")
    files = {
        "rounds.csv": rounds_csv(records),
        "detection.csv": detection_csv(detection),
        "config.json": json.dumps(config, indent=2, sort_keys=True) + "\n",
    }
    files.update(extra_files or {})
    with _writer_lock(out):
        for name, text in files.items():
            (out / name).write_text(text, encoding="utf-8")
        manifest = {
            "config_hash": config_hash(config),
            "files": sorted(files),
            "created_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
            "tool_version": __version__,
            "metric_units": "normalized (min-max fitted on each BS's training split)",
        }
        path = out / "manifest.json"
        path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return path


# --------------------------------------------------------------- tables


def _cell(value) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "ERR"
    if isinstance(value, str):
        return value
    v = cap_metric(value)
    return "100.0" if v >= CAP else f"{v:.3f}"


def summary_table(
    results: Mapping[tuple[str, str], tuple[float, float] | None],
    attacks: Sequence[str] = TABLE_ATTACKS,
) -> tuple[str, str]:
    """Render ``{(rule, attack): (mae, mse) | None}`` as text and CSV.

    Columns follow the fixed attack order (only attacks present in
    ``results`` are shown); rules keep first-seen order. ``None`` renders as
    ``ERR``.
    """
    present = {a for _, a in results}
    cols = [a for a in attacks if a in present]
    rules: list[str] = []
    for r, _ in results:
        if r not in rules:
            rules.append(r)
    header = ["Aggregation Rule", "Metric", *[TABLE_ATTACK_LABELS.get(a, a) for a in cols]]
    rows = []
    for r in rules:
        for k, metric in enumerate(("MAE", "MSE")):
            cells = []
            for a in cols:
                res = results.get((r, a))
                cells.append("ERR" if res is None else _cell(res[k]))
            rows.append([r if k == 0 else "", metric, *cells])
    widths = [max(len(str(x)) for x in col) for col in zip(header, *rows)]
    lines = ["  ".join(str(x).ljust(w) for x, w in zip(header, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(str(x).ljust(w) for x, w in zip(row, widths)).rstrip() for row in rows]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["rule", "metric", *cols])
    for i, row in enumerate(rows):
        writer.writerow([rules[i // 2], row[1], *row[2:]])
    return "\n".join(lines) + "\n", buf.getvalue()
