#!/usr/bin/env python3
"""Every aggregation rule against no attack and the six attacks (MAE/MSE table)."""

from _common import base_parser, exit_with, forward

if __name__ == "__main__":
    p = base_parser(__doc__, "matrix")
    p.add_argument("--aggregators", help="comma list (default: all rules)")
    p.add_argument("--attacks", help="comma list (default: none and the six attacks)")
    args = p.parse_args()
    argv = ["matrix"]
    if args.aggregators:
        argv += ["--aggregators", args.aggregators]
    if args.attacks:
        argv += ["--attacks", args.attacks]
    exit_with(forward(args, argv))
