#!/usr/bin/env python3
"""Plots a stancelab reports directory: weekly volume, stance bands,
calibration reliability and the turnaround distribution."""

import argparse
import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def read_tsv(path):
    with open(path, encoding="utf-8") as f:
        rows = [line for line in f if not line.startswith("#")]
    return list(csv.DictReader(rows, delimiter="\t"))


def plot_volume(ax, rows):
    ax.plot([r["week_start"] for r in rows], [int(r["posts"]) for r in rows])
    ax.set_title("Posts per week")
    step = max(1, len(rows) // 8)
    ax.set_xticks(range(0, len(rows), step))
    ax.set_xticklabels([rows[i]["week_start"] for i in range(0, len(rows), step)], rotation=45, ha="right")


def plot_bands(ax, rows):
    scopes = sorted({r["scope"] for r in rows}, key=["all", "t0", "t1"].index)
    bands = ["opposition", "undisclosed", "defense"]
    width = 0.8 / len(scopes)
    for k, scope in enumerate(scopes):
        share = {r["band"]: float(r["share"]) for r in rows if r["scope"] == scope}
        ax.bar([i + k * width for i in range(len(bands))], [share[b] for b in bands], width, label=scope)
    ax.set_xticks([i + 0.4 - width / 2 for i in range(len(bands))])
    ax.set_xticklabels(bands)
    ax.set_title("Stance bands")
    ax.legend()


def plot_reliability(ax, rows):
    for name in ("holdout", "training_oof"):
        pts = [r for r in rows if r["set"] == name and int(r["count"]) > 0]
        ax.plot([float(r["mean_confidence"]) for r in pts], [float(r["empirical_rate"]) for r in pts], "o-", label=name)
    ax.plot([0, 1], [0, 1], "k:")
    ax.set_title("Calibration")
    ax.set_xlabel("mean probability")
    ax.set_ylabel("observed rate")
    ax.legend()


def plot_turnaround(ax, rows):
    ax.hist([float(r["delta"]) for r in rows], bins=30, range=(-1, 1))
    ax.set_title("Turnaround")
    ax.set_xlabel("p_t1 - p_t0")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("reports", type=Path, help="reports directory of a pipeline run")
    parser.add_argument("--out", type=Path, default=Path("reports.png"))
    args = parser.parse_args()

    fig, axes = plt.subplots(2, 2, figsize=(12, 9))
    plot_volume(axes[0][0], read_tsv(args.reports / "volume_weekly.tsv"))
    plot_bands(axes[0][1], read_tsv(args.reports / "stance_distribution.tsv"))
    plot_reliability(axes[1][0], read_tsv(args.reports / "calibration.tsv"))
    plot_turnaround(axes[1][1], read_tsv(args.reports / "turnaround.tsv"))
    fig.tight_layout()
    fig.savefig(args.out, dpi=120)


if __name__ == "__main__":
    main()
