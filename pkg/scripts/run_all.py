"""Run every CLI subcommand with its defaults into ``runs/<subcommand>``.

Usage: ``python3 scripts/run_all.py [output_root]``. Exit status is the
largest exit status of the individual runs.
"""
import sys
import time
from pathlib import Path

from superdensity.cli import main

RUNS = {
    "gallery-list": ["gallery-list"],
    "estimate": ["estimate", "--gallery", "graded_2_5", "--points", "sampled", "--samples", "20", "--svg"],
    "laws": ["laws", "--param", "pairs=50"],
    "forms": ["forms", "--samples", "40", "--svg"],
    "approx": ["approx", "--samples", "100", "--param", "stages=4,6,8", "--param", "impossibility_m=4"],
}


def run(root):
    worst = 0
    for name, args in RUNS.items():
        t0 = time.perf_counter()
        code = main(args + ["-o", str(Path(root) / name)]) if name != "gallery-list" else main(args)
        print(f"{name}: exit {code} in {time.perf_counter() - t0:.1f} s", file=sys.stderr)
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    sys.exit(run(sys.argv[1] if len(sys.argv) > 1 else "runs"))
