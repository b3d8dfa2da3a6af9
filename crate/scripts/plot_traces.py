#!/usr/bin/env python3
"""Plot J^k curves from submax outputs.

Each argument is a run directory (with trace.csv), a montecarlo directory
(with jk_mean.csv) or a CSV file. Curves are labelled by directory name.

    python3 scripts/plot_traces.py out/complete out/general out/string -o jk.png
"""

import argparse
import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def load_curve(path: Path):
    if path.is_dir():
        for name in ("jk_mean.csv", "trace.csv"):
            if (path / name).exists():
                return load_curve(path / name)
        raise SystemExit(f"{path}: no jk_mean.csv or trace.csv")
    with path.open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    column = "J_k_mean" if rows and "J_k_mean" in rows[0] else "J_k"
    iters = [int(r["iter"]) for r in rows]
    values = [float(r[column]) for r in rows]
    return iters, values


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("inputs", nargs="+", type=Path)
    parser.add_argument("-o", "--output", type=Path, default=Path("jk.png"))
    parser.add_argument("--linear", action="store_true", help="linear y axis")
    args = parser.parse_args()

    fig, ax = plt.subplots(figsize=(6, 4))
    for path in args.inputs:
        iters, values = load_curve(path)
        label = path.name if path.is_dir() else path.parent.name or path.stem
        ax.plot(iters, values, label=label)
    ax.set_xlabel("iteration k")
    ax.set_ylabel("J^k")
    if not args.linear:
        ax.set_yscale("log")
    ax.legend()
    fig.tight_layout()
    fig.savefig(args.output, dpi=150)
    print(f"wrote {args.output}")


if __name__ == "__main__":
    main()
