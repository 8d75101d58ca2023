#!/usr/bin/env python3
"""No-attack FedAvg on noiseless synthetic data: per-round MAE in normalized units.

Used to calibrate the convergence threshold that the simulator tests assert
(final MAE below 0.05 of the target range).
"""

import argparse

from fedwtp.config import resolve
from fedwtp.sim import run_experiment

if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--num-bs", type=int, default=20)
    p.add_argument("--rounds", type=int, default=50)
    p.add_argument("--seeds", type=int, default=3)
    args = p.parse_args()
    for seed in range(args.seeds):
        cfg = resolve(
            {
                "data": {"noise_std": 0.0},
                "fleet": {"num_bs": args.num_bs},
                "aggregator": {"kind": "mean"},
                "rounds": args.rounds,
                "seeds": {"data": seed, "init": seed, "round": seed, "shuffle": seed},
            }
        )
        maes = [r.mae_raw for r in run_experiment(cfg).records]
        marks = ", ".join(f"t={t}: {maes[t]:.4f}" for t in (0, 9, 24, len(maes) - 1) if t < len(maes))
        print(f"seed {seed}: {marks}")
