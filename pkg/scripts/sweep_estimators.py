#!/usr/bin/env python3
"""GLID's percentile-pair estimators (SD, IQR, z-score, one-class SVM) under each attack."""

from _common import base_parser, exit_with, forward

if __name__ == "__main__":
    p = base_parser(__doc__, "estimators")
    p.add_argument("--values", default="sd,iqr,zscore,svm")
    p.add_argument("--attacks", default="trim,history,random,mpaf,zheng,fti")
    args = p.parse_args()
    exit_with(forward(args, ["sweep", "--param", "estimator", "--values", args.values, "--attacks", args.attacks]))
