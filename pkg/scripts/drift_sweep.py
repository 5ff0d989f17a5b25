#!/usr/bin/env python3
"""Sweep the up-probability of a +-1 walk and watch the optimal rule flip.

For p < 1/2 stopping immediately is optimal, for p > 1/2 holding to the
horizon is, and at p = 1/2 the two tie; the sweep prints all three values
per p and writes them as CSV.
"""

import argparse
import csv

from peakstop.lattice import (
    LatticeStepDistribution,
    PredictionProblem,
    snell_solve,
    value_stop_at_end,
    value_stop_now,
)
from peakstop.rewards import Exponential, Indicator0


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--horizon", type=int, default=12)
    ap.add_argument("--steps", type=int, default=21, help="number of p values")
    ap.add_argument("--reward", choices=["indicator0", "exponential"], default="indicator0")
    ap.add_argument("--out", default="drift_sweep.csv")
    args = ap.parse_args()

    f = Indicator0() if args.reward == "indicator0" else Exponential(1.0)
    rows = []
    print(f"{'p':>6} {'stop now':>12} {'stop at end':>12} {'optimal':>12} {'best rule':>12}")
    for i in range(args.steps):
        p = 0.30 + 0.40 * i / (args.steps - 1)
        dist = LatticeStepDistribution(1.0, ((1, p), (-1, 1.0 - p)))
        g = value_stop_now(dist, f, args.horizon, 0)
        d = value_stop_at_end(dist, f, args.horizon, 0)
        v = snell_solve(PredictionProblem(dist, args.horizon, f)).value
        best = "stop now" if g >= d else "hold"
        print(f"{p:6.3f} {g:12.6f} {d:12.6f} {v:12.6f} {best:>12}")
        rows.append((p, g, d, v, best))

    with open(args.out, "w", newline="\n") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["p", "stop_now", "stop_at_end", "optimal", "best_rule"])
        w.writerows(rows)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
