#!/usr/bin/env python3
"""Plot the statistical-linearization relative-error profiles.

Usage: plot_errors.py <artifact_dir> [output.png]
Reads relative_errors.csv written by the simulate subcommand.
"""

import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def main():
    if len(sys.argv) < 2:
        sys.exit(__doc__)
    out_dir = Path(sys.argv[1])
    target = sys.argv[2] if len(sys.argv) > 2 else out_dir / "relative_errors.png"

    t, mean_err, cov_err = [], [], []
    with open(out_dir / "relative_errors.csv") as f:
        header = None
        for line in f:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if header is None:
                header = line.split(",")
                continue
            row = [float(v) for v in line.split(",")]
            t.append(row[0])
            mean_err.append(row[1])
            cov_err.append(row[2])

    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    axes[0].plot(t, mean_err)
    axes[0].set_xlabel("t [s]")
    axes[0].set_title("relative mean error")
    axes[1].plot(t, cov_err)
    axes[1].set_xlabel("t [s]")
    axes[1].set_title("relative covariance error")
    for ax in axes:
        ax.set_yscale("log")
    fig.tight_layout()
    fig.savefig(target, dpi=130)
    print(f"wrote {target}")


if __name__ == "__main__":
    main()
