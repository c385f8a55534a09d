"""Line charts from sweep CSVs (needs matplotlib, e.g. ``pip install .[plot]``).

    python3 scripts/plot_sweeps.py results/overhead_I2.csv [...] [--savings]

One PNG per CSV, next to it.  By default the y axis is the mean completion
time; ``--savings`` plots the percent saved against G=1 instead.
"""

import argparse
import csv
from collections import defaultdict
from pathlib import Path

AXIS_LABELS = {"overhead": "overhead H", "group_size": "group size G",
               "ratio": "tasks per worker S/W", "lambda": "lambda"}


def plot(path: Path, savings: bool) -> Path:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    curves = defaultdict(list)
    with open(path) as fh:
        for row in csv.DictReader(fh):
            key = (row["policy"], int(row["group_size"]))
            y = row["savings_vs_g1_pct"] if savings else row["mean_makespan"]
            curves[key].append((float(row["axis"]), float(y)))
    axis = path.with_suffix(".json")
    axis_name = None
    if axis.exists():
        import json

        axis_name = json.loads(axis.read_text())["axis"]

    fig, ax = plt.subplots(figsize=(6, 4))
    by_group = axis_name == "group_size"
    if by_group:
        merged = defaultdict(list)
        for (policy, _), pts in curves.items():
            merged[(policy, None)].extend(pts)
        curves = merged
    for (policy, g), pts in sorted(curves.items(), key=lambda kv: (kv[0][0], kv[0][1] or 0)):
        pts.sort()
        label = policy if g is None else f"{policy}, G={g}"
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", ms=3, label=label)
    ax.set_xlabel(AXIS_LABELS.get(axis_name, "axis"))
    ax.set_ylabel("time savings vs G=1 (%)" if savings else "mean completion time")
    ax.grid(alpha=0.3)
    ax.legend(fontsize=7)
    fig.tight_layout()
    out = path.with_suffix(".savings.png" if savings else ".png")
    fig.savefig(out, dpi=130)
    plt.close(fig)
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("csv", nargs="+", type=Path)
    ap.add_argument("--savings", action="store_true")
    args = ap.parse_args(argv)
    for p in args.csv:
        print(plot(p, args.savings))


if __name__ == "__main__":
    main()
