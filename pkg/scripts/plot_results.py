"""Plots for the experiment outputs (needs matplotlib, which the package does not).

    python scripts/plot_results.py phase results/phase_transition.cells.csv
    python scripts/plot_results.py trace results/ill_conditioned/*.trace.csv
"""

import argparse
import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def plot_phase(path, out):
    rows = read_rows(path)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for rank in sorted({int(r["rank"]) for r in rows}):
        sel = [r for r in rows if int(r["rank"]) == rank]
        ax.plot([float(r["rho"]) for r in sel], [float(r["success_prob"]) for r in sel],
                marker="o", label=f"r = {rank}")
    ax.set_xlabel("oversampling factor rho")
    ax.set_ylabel("success probability")
    ax.set_ylim(-0.05, 1.05)
    ax.legend()
    fig.tight_layout()
    fig.savefig(out, dpi=150)


def plot_traces(paths, out):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for path in paths:
        rows = [r for r in read_rows(path) if r["procrustes_err"]]
        ax.semilogy([int(r["k"]) for r in rows], [float(r["procrustes_err"]) for r in rows],
                    label=Path(path).name.split(".")[0])
    ax.set_xlabel("outer iteration")
    ax.set_ylabel("relative Procrustes error")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(out, dpi=150)


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("kind", choices=("phase", "trace"))
    p.add_argument("inputs", nargs="+")
    p.add_argument("--out", default=None)
    args = p.parse_args()
    if args.kind == "phase":
        plot_phase(args.inputs[0], args.out or "phase_transition.png")
    else:
        plot_traces(args.inputs, args.out or "traces.png")


if __name__ == "__main__":
    main()
