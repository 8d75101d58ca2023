#!/usr/bin/env python3
"""FTI strength as a function of the initial blend factor eta0."""

from _common import base_parser, exit_with, forward

if __name__ == "__main__":
    p = base_parser(__doc__, "eta0")
    p.add_argument("--values", default="0,1,2,5,10,20,50")
    args = p.parse_args()
    exit_with(forward(args, ["sweep", "--param", "eta0", "--values", args.values, "--attacks", "fti"]))
