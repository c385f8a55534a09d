"""Evaluate the independent test oracles and store the results.

    python scripts/freeze_oracles.py

Writes tests/data/oracles.json.  Re-run only if the oracle definitions change;
the tests recompute a sample of entries to check the file is current.
"""

import itertools
import json
import sys
import time
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "tests"))

import oracles  # noqa: E402

FIT_CASES = 50
DET_GRID = {"k": [1, 2, 3], "W": [1, 2, 3], "G": [1, 2, 4], "H": [0.0, 1.5], "x": [1.0, 2.5]}


def main():
    t0 = time.time()
    det = []
    for k, W, G, H, x in itertools.product(*DET_GRID.values()):
        S = k * W * G
        makespan, idle_early = oracles.enumerate_deterministic(W, S, G, H, x)
        det.append({"k": k, "W": W, "G": G, "H": H, "x": x, "S": S,
                    "makespan": makespan, "idle_early": idle_early})

    fits = []
    for seed in range(FIT_CASES):
        _, A, y, w = oracles.random_fit_case(seed)
        f_grid, p_grid = oracles.grid_search(A, y)
        fits.append({"seed": seed, "n": A.shape[1], "weights": w.tolist(),
                     "grid_objective": f_grid, "grid_argmin": p_grid.tolist()})
        print(f"fit case {seed}: n={A.shape[1]} grid min {f_grid:.3e}", file=sys.stderr)

    out = {
        "deterministic_grid": det,
        "fit_cases": fits,
        "mixture_means": {
            "N": oracles.mixture_mean([(1.0, 0.3, 5.0)]),
            "I1": oracles.mixture_mean([(0.6, 0.3, 5.0), (0.4, 0.1, 11.0)]),
            "I2": oracles.mixture_mean([(0.3, 0.3, 5.0), (0.7, 0.04, 19.0)]),
        },
    }
    path = ROOT / "tests" / "data" / "oracles.json"
    path.parent.mkdir(exist_ok=True)
    path.write_text(json.dumps(out, indent=1) + "\n")
    print(f"wrote {path} in {time.time() - t0:.1f}s", file=sys.stderr)


if __name__ == "__main__":
    main()
