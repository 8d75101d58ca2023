"""Command-line runner: single runs, attack x defense matrices, and sweeps.

Exit codes: 0 success, 1 invalid configuration, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import yaml

from .aggregators import RULES
from .attacks import ATTACK_KINDS
from .config import ConfigError, ExperimentConfig, dump_config, resolve
from .metrics import TABLE_ATTACKS, cap_metric, persist_run, summary_table
from .sim import ExperimentResult, prepare_data, run_experiment

log = logging.getLogger("fedwtp")

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2
SWEEP_PARAMS = ("fake_pct", "eta0", "fleet_size", "percentile_pair", "estimator")


# --------------------------------------------------------------- config


def _load_raw(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError([f"config file: {exc}"]) from exc
    try:
        raw = yaml.safe_load(text) if text.strip() else {}
    except yaml.YAMLError as exc:
        raise ConfigError([f"config file: not valid YAML ({exc})"]) from exc
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise ConfigError(["config file: top level must be a mapping"])
    return raw


def _apply_overrides(raw: dict, args) -> dict:
    raw = copy.deepcopy(raw)
    if getattr(args, "seed", None) is not None:
        raw["seeds"] = {k: args.seed for k in ("data", "init", "round", "shuffle")}
    if getattr(args, "out", None) is not None:
        raw.setdefault("output", {})
        raw["output"]["dir"] = args.out
    return raw


def _resolve_args(args) -> tuple[dict, ExperimentConfig]:
    raw = _apply_overrides(_load_raw(args.config), args)
    return raw, resolve(raw)


# ------------------------------------------------------------ artifacts


def fti_trace_csv(result: ExperimentResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["round", "iteration", "eta", "dist"])
    for t, k, eta, dist in result.fti_trace:
        w.writerow([t, k, repr(float(eta)), repr(float(dist))])
    return buf.getvalue()


def flags_csv(result: ExperimentResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["round", "dimension", "bs_id", "flagged"])
    for rec in result.records:
        for d, row in enumerate(rec.flags):
            for b, flagged in enumerate(row):
                w.writerow([rec.round, d, b, int(flagged)])
    return buf.getvalue()


def save_result(result: ExperimentResult, cfg: ExperimentConfig, out_dir) -> Path:
    extra = {}
    if cfg.attack.kind == "fti":
        extra["fti_trace.csv"] = fti_trace_csv(result)
    if cfg.output.export_flags:
        extra["flags.csv"] = flags_csv(result)
    return persist_run(result.records, result.detection, cfg.to_dict(), out_dir, extra)


# ---------------------------------------------------------------- cells


def _run_cell(job):
    """Worker entry point: ``(key, config dict, shared data or None)``."""
    key, cfg_dict, data = job
    cfg = resolve(cfg_dict, check_paths=False)
    try:
        result = run_experiment(cfg, data)
    except Exception as exc:  # a failed cell is reported, not fatal
        return key, None, f"{type(exc).__name__}: {exc}"
    return key, result, None


def _run_cells(jobs, workers: int):
    if workers <= 1:
        return [_run_cell(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_cell, jobs))


def _split(text: str | None) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()] if text else []


# ----------------------------------------------------------- subcommands


def cmd_run(args) -> int:
    raw, cfg = _resolve_args(args)
    if args.print_config:
        sys.stdout.write(dump_config(cfg))
        return EXIT_OK
    try:
        result = run_experiment(cfg)
        manifest = save_result(result, cfg, cfg.output.dir)
    except Exception as exc:
        log.error("run failed: %s", exc)
        return EXIT_RUNTIME
    last = result.records[-1] if result.records else None
    if last is not None:
        print(f"final MAE {cap_metric(last.mae_raw):.4f}  MSE {cap_metric(last.mse_raw):.4f}  broken={last.broken}")
    print(f"wrote {manifest}")
    return EXIT_OK


def cmd_matrix(args) -> int:
    raw, cfg = _resolve_args(args)
    rules = _split(args.aggregators) or list(RULES)
    attacks = _split(args.attacks) or list(TABLE_ATTACKS)
    problems = [f"--aggregators: unknown rule {r!r}" for r in rules if r not in RULES]
    problems += [f"--attacks: unknown attack {a!r}" for a in attacks if a not in ATTACK_KINDS]
    if problems:
        raise ConfigError(problems)
    if args.print_config:
        sys.stdout.write(dump_config(cfg))
        return EXIT_OK
    try:
        data = prepare_data(cfg)
    except Exception as exc:
        log.error("data preparation failed: %s", exc)
        return EXIT_RUNTIME
    out = Path(cfg.output.dir)
    jobs = []
    for rule in rules:
        for attack in attacks:
            cell = cfg.to_dict()
            cell["aggregator"]["kind"] = rule
            cell["attack"]["kind"] = attack
            # each cell's config.json reruns that cell into its own directory
            cell["output"]["dir"] = str(out / f"{rule}__{attack}")
            jobs.append(((rule, attack), cell, data))
    results = {}
    try:
        for job, ((rule, attack), result, err) in zip(jobs, _run_cells(jobs, args.workers)):
            if err is not None:
                log.warning("cell %s/%s failed: %s", rule, attack, err)
                results[(rule, attack)] = None
                continue
            results[(rule, attack)] = (result.final_mae, result.final_mse)
            cell_cfg = resolve(job[1], check_paths=False)
            save_result(result, cell_cfg, cell_cfg.output.dir)
        text, table = summary_table(results, attacks)
        out.mkdir(parents=True, exist_ok=True)
        (out / "summary.csv").write_text(table, encoding="utf-8")
        (out / "summary.txt").write_text(text, encoding="utf-8")
    except OSError as exc:
        log.error("cannot write results: %s", exc)
        return EXIT_RUNTIME
    sys.stdout.write(text)
    return EXIT_OK


def _sweep_value(param: str, token: str):
    if param in ("fake_pct", "eta0"):
        return float(token)
    if param == "fleet_size":
        return int(token)
    if param == "percentile_pair":
        lo, hi = token.replace("-", ":").split(":")
        return [float(lo), float(hi)]
    return token


def _apply_sweep(cell: dict, param: str, value) -> None:
    if param == "fake_pct":
        cell["fleet"]["adversary_pct"] = value
    elif param == "eta0":
        cell["attack"]["eta0"] = value
    elif param == "fleet_size":
        cell["fleet"]["num_bs"] = value
    elif param == "percentile_pair":
        cell["aggregator"]["kind"] = "glid"
        cell["aggregator"]["fixed_pair"] = value
    else:
        cell["aggregator"]["kind"] = "glid"
        cell["aggregator"]["estimator"] = value


def cmd_sweep(args) -> int:
    raw, cfg = _resolve_args(args)
    if args.param not in SWEEP_PARAMS:
        raise ConfigError([f"--param: must be one of {', '.join(SWEEP_PARAMS)}"])
    tokens = _split(args.values)
    if not tokens:
        raise ConfigError(["--values: at least one value required"])
    attacks = _split(args.attacks) or [cfg.attack.kind]
    problems = [f"--attacks: unknown attack {a!r}" for a in attacks if a not in ATTACK_KINDS]
    cells = []
    for token in tokens:
        try:
            value = _sweep_value(args.param, token)
        except ValueError:
            problems.append(f"--values: {token!r} is not valid for {args.param}")
            continue
        for attack in attacks:
            cell = cfg.to_dict()
            cell["attack"]["kind"] = attack
            _apply_sweep(cell, args.param, value)
            try:
                resolve(cell)
            except ConfigError as exc:
                problems += [f"{args.param}={token}: {p}" for p in exc.problems]
                continue
            cells.append(((token, attack), cell))
    if problems:
        raise ConfigError(problems)
    if args.print_config:
        sys.stdout.write(dump_config(cfg))
        return EXIT_OK
    # the fleet size changes the data; everything else shares one copy
    try:
        shared = None if args.param == "fleet_size" else prepare_data(cfg)
    except Exception as exc:
        log.error("data preparation failed: %s", exc)
        return EXIT_RUNTIME
    jobs = [(key, cell, shared) for key, cell in cells]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["value", "attack", "mae_capped", "mse_capped"])
    out = Path(cfg.output.dir)
    try:
        for (token, attack), result, err in _run_cells(jobs, args.workers):
            if err is not None:
                log.warning("sweep %s=%s/%s failed: %s", args.param, token, attack, err)
                w.writerow([token, attack, "ERR", "ERR"])
                continue
            w.writerow([token, attack, repr(result.final_mae), repr(result.final_mse)])
        out.mkdir(parents=True, exist_ok=True)
        (out / f"sweep_{args.param}.csv").write_text(buf.getvalue(), encoding="utf-8")
    except OSError as exc:
        log.error("cannot write results: %s", exc)
        return EXIT_RUNTIME
    sys.stdout.write(buf.getvalue())
    return EXIT_OK


# ------------------------------------------------------------------ main


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fedwtp", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("config", nargs="?", help="YAML config; omitted means all defaults")
        p.add_argument("--print-config", action="store_true", help="print the resolved config and exit")
        p.add_argument("--out", help="output directory (overrides output.dir)")
        p.add_argument("--seed", type=int, help="override every seed field")

    p = sub.add_parser("run", help="one experiment")
    common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("matrix", help="aggregation rules x attacks table")
    common(p)
    p.add_argument("--aggregators", help=f"comma list (default all: {','.join(RULES)})")
    p.add_argument("--attacks", help=f"comma list (default: {','.join(TABLE_ATTACKS)})")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_matrix)

    p = sub.add_parser("sweep", help="one parameter over a list of values")
    common(p)
    p.add_argument("--param", required=True, choices=SWEEP_PARAMS)
    p.add_argument("--values", required=True, help="comma list; percentile pairs as lo:hi")
    p.add_argument("--attacks", help="comma list (default: the config's attack)")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
