#!/usr/bin/env python3
"""Plot NC, PT, R and FR against source count from a sweep CSV (needs matplotlib)."""

import argparse
import csv
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

METRICS = {"nc": "collisions per packet", "pt": "propagation time (s)",
           "r": "retransmissions per packet", "fr": "full reception ratio"}


def load(path):
    series = defaultdict(lambda: defaultdict(list))
    for row in csv.DictReader(open(path)):
        label = row["behavior"] if row["behavior"] != "adm" else f"adm {row['priority']}"
        if row["behavior"] == "adm" and row["priority"] == "all":
            continue
        for m in METRICS:
            series[m][(row["preset"], label)].append((int(row["sources"]), float(row[m]),
                                                      float(row["stderr_" + m])))
    return series


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("csv")
    ap.add_argument("--outdir", default="results")
    args = ap.parse_args(argv)
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    for metric, lines in load(args.csv).items():
        fig, ax = plt.subplots(figsize=(5, 3.5))
        for (preset, label), pts in sorted(lines.items()):
            pts.sort()
            xs, ys, es = zip(*pts)
            ax.errorbar(xs, ys, yerr=es, marker="o", ms=3, capsize=2, label=f"{preset} {label}")
        ax.set_xlabel("number of sources")
        ax.set_ylabel(METRICS[metric])
        ax.legend(fontsize=7)
        fig.tight_layout()
        fig.savefig(out / f"sweep-{metric}.png", dpi=150)
        plt.close(fig)
        print("wrote", out / f"sweep-{metric}.png")


if __name__ == "__main__":
    main()
