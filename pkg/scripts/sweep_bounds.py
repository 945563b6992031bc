#!/usr/bin/env python3
"""Tabulate sup-norms, complexity terms, and error bounds over set sizes.

Prints a table for each K given on the command line (default 5 and 10)
and leaves bounds.csv for the largest K under --out.
"""

import argparse
import sys

from candlearn.bounds import BoundInputs, bound_report
from candlearn.cli import main as cli_main


def run(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("k_values", nargs="*", type=int, default=[5, 10])
    parser.add_argument("--n-train", type=int, default=10000)
    parser.add_argument("--delta", type=float, default=0.1)
    parser.add_argument("--out", default="bound_results")
    args = parser.parse_args(argv)

    for k in args.k_values:
        print(f"K = {k}")
        header = f"{'n':>3} {'branch':>7} | {'ova sup':>9} {'ova bound':>11} | {'pc sup':>9} {'pc bound':>11}"
        print(header)
        print("-" * len(header))
        for n_cand in range(1, k):
            inputs = BoundInputs(k=k, n_cand=n_cand, n_train=args.n_train, delta=args.delta)
            report = bound_report(inputs)
            print(
                f"{n_cand:>3} {report.branch:>7} | {report.ova_sup:>9.4f} "
                f"{report.ova_err_bound:>11.4f} | {report.pc_sup:>9.4f} "
                f"{report.pc_err_bound:>11.4f}"
            )
        print()
    return cli_main(
        [
            "bounds",
            "--k", str(max(args.k_values)),
            "--n-train", str(args.n_train),
            "--delta", str(args.delta),
            "--out", args.out,
        ]
    )


if __name__ == "__main__":
    sys.exit(run())
