"""Run every manifest under manifests/ and collect the outputs.

    python3 scripts/run_all_manifests.py [--out results] [--reps N] [--only PATTERN]

Sweep manifests produce ``<name>.csv`` and ``<name>.json``; single-run
manifests produce ``<name>.svg`` and ``<name>.trace.json`` plus a line of
metrics in ``runs.jsonl``.  ``--reps`` overrides the repetition count, which
is handy for a quick pass (the shipped manifests use 2,000 to 10,000).
"""

import argparse
import dataclasses
import fnmatch
import json
import sys
import time
from pathlib import Path

from stragglersim.config import load_run_manifest, load_sweep_manifest, read_toml
from stragglersim.experiments import sweep, write_csv, write_json
from stragglersim.metrics_trace import export_trace
from stragglersim.sim_engine import run

ROOT = Path(__file__).resolve().parents[1]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--manifests", type=Path, default=ROOT / "manifests")
    ap.add_argument("--out", type=Path, default=ROOT / "results")
    ap.add_argument("--reps", type=int, help="override repetitions of every sweep")
    ap.add_argument("--only", default="*", help="glob on manifest file names")
    args = ap.parse_args(argv)
    args.out.mkdir(parents=True, exist_ok=True)

    paths = sorted(p for p in args.manifests.glob("*.toml") if fnmatch.fnmatch(p.name, args.only))
    runs = []
    for path in paths:
        t0 = time.time()
        if "sweep" in read_toml(path):
            spec = load_sweep_manifest(path)
            if args.reps:
                spec = dataclasses.replace(spec, repetitions=args.reps)
            result = sweep(spec)
            write_csv(result, args.out / f"{path.stem}.csv")
            write_json(result, args.out / f"{path.stem}.json")
            what = f"{len(result.rows)} cells x {spec.repetitions} reps"
        else:
            m = load_run_manifest(path)
            r = run(m.config)
            export_trace(r.trace, "svg", args.out / f"{path.stem}.svg", title=m.title)
            export_trace(r.trace, "json", args.out / f"{path.stem}.trace.json")
            runs.append({"manifest": path.name, "makespan": r.makespan, **r.metrics.to_dict()})
            what = f"makespan {r.makespan:.2f}"
        print(f"{path.name}: {what} ({time.time() - t0:.1f}s)", file=sys.stderr)
    if runs:
        with open(args.out / "runs.jsonl", "w") as fh:
            for row in runs:
                fh.write(json.dumps(row, sort_keys=True) + "\n")


if __name__ == "__main__":
    main()
