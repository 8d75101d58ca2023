#!/usr/bin/env python3
"""GLID with fixed percentile pairs instead of an estimator."""

from _common import base_parser, exit_with, forward

if __name__ == "__main__":
    p = base_parser(__doc__, "percentile_pairs")
    p.add_argument("--values", default="0:100,5:95,10:90,20:80,30:70")
    p.add_argument("--attacks", default="random,fti")
    args = p.parse_args()
    exit_with(forward(args, ["sweep", "--param", "percentile_pair", "--values", args.values, "--attacks", args.attacks]))
