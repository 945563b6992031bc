#!/usr/bin/env python3
"""Full N-sweep on the 5-class Gaussian blob problem, both loss families.

Writes runs.csv / summary.csv / manifest.json under --out (default
desk_results/).  At K=5 the sweep covers every candidate-set size 1..4
with five trials each; expect a couple of minutes on a laptop.
"""

import sys

from candlearn.cli import main

if __name__ == "__main__":
    argv = sys.argv[1:]
    if not any(a.startswith("--out") for a in argv):
        argv = ["--out", "desk_results", *argv]
    sys.exit(main(["experiment", "--k", "5", "--n-values", "1..4", "--seeds", "5", *argv]))
