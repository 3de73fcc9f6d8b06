#!/usr/bin/env python3
"""Plot the solved mean trajectory, dispersion, and control schedule.

Usage: plot_trajectory.py <artifact_dir> [output.png]
Reads belief_trajectory.csv + control.csv and, when present, paths_sample.csv.
"""

import csv
import math
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def read_table(path):
    rows = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            rows.append(line.split(","))
    header = rows[0]
    data = [[float(v) for v in r] for r in rows[1:]]
    return header, data


def column(header, data, name):
    idx = header.index(name)
    return [r[idx] for r in data]


def main():
    if len(sys.argv) < 2:
        sys.exit(__doc__)
    out_dir = Path(sys.argv[1])
    target = sys.argv[2] if len(sys.argv) > 2 else out_dir / "trajectory.png"

    bh, bd = read_table(out_dir / "belief_trajectory.csv")
    t = column(bh, bd, "t")
    y = column(bh, bd, "m1")
    z = column(bh, bd, "m2")
    sy = [math.sqrt(v) for v in column(bh, bd, "P1_1")]
    sz = [math.sqrt(v) for v in column(bh, bd, "P2_2")]

    fig, axes = plt.subplots(1, 3, figsize=(15, 4.5))

    ax = axes[0]
    sample = out_dir / "paths_sample.csv"
    if sample.exists():
        ph, pd = read_table(sample)
        ti, pi = ph.index("t"), ph.index("path")
        xi, zi = ph.index("x1"), ph.index("x2")
        by_path = {}
        for r in pd:
            by_path.setdefault(r[pi], []).append((r[ti], r[xi], r[zi]))
        for _, pts in by_path.items():
            ax.plot([p[1] for p in pts], [p[2] for p in pts],
                    color="0.8", lw=0.5, zorder=1)
    ax.plot(y, z, "b-", lw=2, zorder=2, label="mean")
    ax.plot([y[0]], [z[0]], "ko")
    ax.plot([0], [0], "r*", ms=12)
    ax.set_xlabel("y [m]")
    ax.set_ylabel("z [m]")
    ax.set_title("trajectory")
    ax.legend()

    ax = axes[1]
    ax.plot(t, sy, label="std y")
    ax.plot(t, sz, label="std z")
    ax.set_xlabel("t [s]")
    ax.set_ylabel("position std [m]")
    ax.set_title("dispersion")
    ax.legend()

    ch, cd = read_table(out_dir / "control.csv")
    tc = column(ch, cd, "t")
    norm = column(ch, cd, "norm_u")
    ax = axes[2]
    ax.step(tc, norm, where="post")
    ax.axhline(0.2, color="k", ls=":")
    ax.axhline(0.8, color="k", ls=":")
    ax.set_xlabel("t [s]")
    ax.set_ylabel("||u||")
    ax.set_title("control norm")

    fig.tight_layout()
    fig.savefig(target, dpi=130)
    print(f"wrote {target}")


if __name__ == "__main__":
    main()
