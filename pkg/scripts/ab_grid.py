"""Grid over the bound weights a and b at fixed theta; prints mean norm_m/norm_c/acc.

    python3 scripts/ab_grid.py --theta 0.5 --values 0.5,1,2,3 --reps 10
"""

import argparse
import csv
import io

import numpy as np

from udsched.experiment import ExperimentSpec, summary_csv, sweep
from udsched.workflow import HOUR_SCALE


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--workflow", nargs="+", default=["pipeline:100", "fanout_fanin:100"])
    ap.add_argument("--theta", type=float, default=0.5)
    ap.add_argument("--values", default="0.5,1,2,3")
    ap.add_argument("--reps", type=int, default=10)
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()

    vals = tuple(float(v) for v in args.values.split(","))
    spec = ExperimentSpec(tuple(args.workflow), (args.theta,), vals, vals, args.reps, args.seed,
                          synthetic=HOUR_SCALE)
    rows = list(csv.DictReader(io.StringIO(summary_csv(sweep(spec, jobs=args.jobs)))))
    print(f"{'a':>4} {'b':>4} {'norm_m':>7} {'norm_c':>7} {'acc':>6}")
    for a in vals:
        for b in vals:
            sel = [r for r in rows if float(r["a"]) == a and float(r["b"]) == b]
            m, c, acc = (np.mean([float(r[k]) for r in sel]) for k in ("norm_m", "norm_c", "acc"))
            print(f"{a:4g} {b:4g} {m:7.3f} {c:7.3f} {acc:6.1f}")


if __name__ == "__main__":
    main()
