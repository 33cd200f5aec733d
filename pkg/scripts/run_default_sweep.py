"""Run the default epsilon sweep and keep its artifacts.

Thin wrapper over `sde-lab sweep` with the package defaults (quartic drift,
t = 0.9, N = 10^4 paths, eps = e^-1 .. e^-6, pinned master seed). Writes
sweep.csv and sweep_summary.json to --output and prints the domination
report; exit code 0 means every bound check passed.

Usage: python scripts/run_default_sweep.py [--output results] [--threads 4]
       [--paths 10000] [--seed 1]
"""

from __future__ import annotations

import argparse
import sys

from sde_lab import cli


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--output", default="results")
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--paths", type=int, default=None)
    ap.add_argument("--seed", type=int, default=None)
    ns = ap.parse_args()

    argv = ["sweep", "--output", ns.output, "--threads", str(ns.threads)]
    if ns.paths is not None:
        argv += ["--n-paths", str(ns.paths)]
    if ns.seed is not None:
        argv += ["--seed", str(ns.seed)]
    return cli.main(argv)


if __name__ == "__main__":
    sys.exit(main())
