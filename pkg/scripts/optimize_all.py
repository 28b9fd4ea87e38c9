#!/usr/bin/env python3
"""Build a full knowledge base by optimizing every density preset in turn.

Each preset writes its three rows into the same KB file plus a front CSV.
Set ADM_THREADS to evaluate genomes in parallel.
"""

import argparse
import sys
from pathlib import Path

from adm_broadcast.cli import main as cli_main
from adm_broadcast.scenarios import PRESETS


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results/kb-optimized.txt")
    ap.add_argument("--ga-config", help="key/value GA settings file")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--presets", default="rural,highway,suburban,urban",
                    help="cheapest first; urban takes by far the longest")
    args = ap.parse_args(argv)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    for preset in args.presets.split(","):
        if preset not in PRESETS:
            ap.error(f"unknown preset {preset}")
        cmd = ["-v", "optimize", "--preset", preset, "--out", args.out, "--seed", str(args.seed)]
        if args.ga_config:
            cmd += ["--ga-config", args.ga_config]
        code = cli_main(cmd)
        if code:
            return code
        print(f"{preset}: rows written to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
