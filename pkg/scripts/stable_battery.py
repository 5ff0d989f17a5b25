#!/usr/bin/env python3
"""Monte Carlo batteries for stable jump models.

Runs the symmetric alpha = 1 tie check (stop-now, hold, stop-at-new-max all
statistically equal) and the skewed alpha = 0.5 battery (holding to the
horizon never beaten), printing per-rule paired differences.
"""

import argparse
import math

from peakstop import montecarlo as mc, rules
from peakstop.levy import LevyMeasure, LevyTriplet, PowerLawPiece, SimScheme
from peakstop.rewards import Exponential


def stable(alpha, c1, c2, gamma=0.0):
    return LevyTriplet(
        gamma, 0.0,
        LevyMeasure(pieces=(
            PowerLawPiece(c1, alpha, 0.0, math.inf),
            PowerLawPiece(c2, alpha, -math.inf, 0.0),
        )),
    )


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--paths", type=int, default=50_000)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--level", type=int, default=3, help="truncation level")
    args = ap.parse_args()

    f = Exponential(1.0)

    print("== symmetric alpha=1: rule ties ==")
    sym = stable(1.0, 1.0, 1.0)
    scheme = SimScheme(mode="truncated", dt=0.01, level=args.level, eps_seed=0.5)
    hold = rules.ConstantRule(1.0)
    for other in (rules.ConstantRule(0.0), rules.StopAtNewMax(after=0.5)):
        rep = mc.paired_compare(sym, f, other, hold, 1.0, args.paths, args.seed, scheme)
        sigmas = rep.mean_diff / max(rep.se_diff, 1e-300)
        print(f"  {other.describe():32s} diff {rep.mean_diff:+.5f} ({sigmas:+.2f} SE)")

    print("== skewed alpha=0.5 (heavier right tail, drift above the jump mean) ==")
    skew = stable(0.5, 2.0, 1.0, gamma=3.0)
    rep = mc.bangbang_battery(
        skew, f, 1.0, count=args.paths, seed=args.seed,
        scheme=SimScheme(mode="truncated", dt=0.01, level=4, eps_seed=0.5),
    )
    print(f"  designated: {rep.designated}  license: {rep.license}")
    for row in rep.rows:
        sigmas = row.mean_diff / max(row.se_diff, 1e-300)
        flag = "BEATEN" if row.beaten else "ok"
        print(f"  {row.rule:32s} diff {row.mean_diff:+.5f} ({sigmas:+.2f} SE) {flag}")
    print(f"  battery {'passed' if rep.passed else 'FAILED'}")
    print(f"  note: {rep.footer}")


if __name__ == "__main__":
    main()
