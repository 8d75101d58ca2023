#!/usr/bin/env python3
"""FTI against the configured rule as the share of fake BSs grows."""

from _common import base_parser, exit_with, forward

if __name__ == "__main__":
    p = base_parser(__doc__, "fake_pct")
    p.add_argument("--values", default="0,5,10,20,30,40")
    p.add_argument("--attacks", default="fti")
    args = p.parse_args()
    exit_with(forward(args, ["sweep", "--param", "fake_pct", "--values", args.values, "--attacks", args.attacks]))
