"""Shared helpers for the experiment scripts (run them from the repo root)."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
DEFAULT_CONFIG = ROOT / "configs" / "default.yaml"


def base_parser(description: str, out: str) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(description=description)
    p.add_argument("--config", default=str(DEFAULT_CONFIG))
    p.add_argument("--out", default=str(ROOT / "runs" / out))
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--seed", type=int)
    return p


def forward(args, argv: list[str]) -> int:
    from fedwtp.cli import main

    argv = [*argv, args.config, "--out", args.out, "--workers", str(args.workers)]
    if args.seed is not None:
        argv += ["--seed", str(args.seed)]
    return main(argv)


def exit_with(code: int) -> None:
    sys.exit(code)
