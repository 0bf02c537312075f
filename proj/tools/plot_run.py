#!/usr/bin/env python3
"""Plot a run directory: loss curves and evaluated trajectories.

    python3 tools/plot_run.py runs/<hash> -o runs/<hash>/plots
"""

import argparse
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402


def plot_losses(run, out):
    files = sorted((run / "loss").glob("*.csv"))
    if not files:
        return None
    fig, ax = plt.subplots(figsize=(7, 4))
    for f in files:
        df = pd.read_csv(f)
        ax.plot(df["epoch"], df["loss"], label=f.stem)
    ax.set_yscale("log")
    ax.set_xlabel("epoch")
    ax.set_ylabel("training loss")
    ax.legend(fontsize="small")
    path = out / "loss.png"
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_trajectories(run, out):
    f = run / "trajectories.csv"
    if not f.exists():
        return None
    df = pd.read_csv(f)
    fig, ax = plt.subplots(figsize=(7, 4))
    first = df[df["branch_id"] == df["branch_id"].iloc[0]]
    ax.plot(first["cycle_index"], first["actual"], color="black", label="actual")
    for branch, g in df.groupby("branch_id"):
        ax.plot(g["cycle_index"], g["autoregressive"], label=f"{branch} (rollout)")
    ax.set_xlabel("cycle index")
    ax.set_ylabel("capacity / C0")
    ax.legend(fontsize="small")
    path = out / "trajectories.png"
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("run", help="run directory written by train/evaluate")
    p.add_argument("-o", "--out", help="output folder (default: <run>/plots)")
    args = p.parse_args(argv)
    run = Path(args.run)
    out = Path(args.out) if args.out else run / "plots"
    out.mkdir(parents=True, exist_ok=True)
    written = [p for p in (plot_losses(run, out), plot_trajectories(run, out)) if p]
    if not written:
        print(f"error: nothing to plot in {run}", file=sys.stderr)
        return 3
    for w in written:
        print(w)
    return 0


if __name__ == "__main__":
    sys.exit(main())
