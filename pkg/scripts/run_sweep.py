#!/usr/bin/env python3
"""Source-count sweep of ADM, smart flooding and simple flooding (one long CSV).

    python3 scripts/run_sweep.py --out results/sweep-suburban.csv
"""

import argparse
import sys

from adm_broadcast.cli import main as cli_main
from adm_broadcast.scenarios import bundled_kb_path


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--presets", default="suburban")
    ap.add_argument("--sources", default="3,5,10,15,20,25,30")
    ap.add_argument("--replications", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--kb", default=str(bundled_kb_path("kb-suburban.txt")),
                    help="defaults to the medium-density rows for every density")
    ap.add_argument("--out", default="results/sweep.csv")
    args = ap.parse_args(argv)
    return cli_main(["-v", "sweep", "--presets", args.presets, "--behaviors", "adm,smart,simple",
                     "--sources", args.sources, "--replications", str(args.replications),
                     "--seed", str(args.seed), "--kb", args.kb, "--out", args.out])


if __name__ == "__main__":
    sys.exit(main())
