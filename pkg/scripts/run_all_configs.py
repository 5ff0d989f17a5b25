#!/usr/bin/env python3
"""Run every bundled config through the CLI into out/<name>/."""

import argparse
import os
import sys

from peakstop import cli


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--configs", default="configs")
    ap.add_argument("--out", default="out")
    ap.add_argument("--paths", type=int, default=None, help="override path counts")
    args = ap.parse_args()

    worst = 0
    for name in sorted(os.listdir(args.configs)):
        if not name.endswith(".json"):
            continue
        cfg = cli.load_config(os.path.join(args.configs, name))
        if args.paths is not None:
            cfg.paths = args.paths
        out_dir = os.path.join(args.out, name.removesuffix(".json"))
        code = cli.run(cfg, out_dir, quiet=False)
        print(f"  {name}: exit {code} -> {out_dir}/")
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    sys.exit(main())
