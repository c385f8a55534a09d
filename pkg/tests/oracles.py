"""Independent reference computations used by the tests.

Nothing here imports the package's scheduling or simulation code, so a bug
there cannot leak into the expected values.  ``scripts/freeze_oracles.py``
evaluates these once and stores the results in ``tests/data/oracles.json``.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


def enumerate_deterministic(W: int, S: int, G: int, H: float, x: float) -> tuple[float, bool]:
    """Event-by-event schedule of fresh groups when every task takes ``x``.

    Workers pull up to ``G`` unassigned tasks whenever they go idle (earliest
    idle first, then lowest id), pay ``H`` and run the group back to back.
    Returns the last completion time and whether some worker sat idle while
    tasks were still running, i.e. whether a replicating scheduler would have
    started a replica before the end.
    """
    free_at = [0.0] * W
    remaining = S
    ends = []
    idle_early = False
    while remaining:
        t = min(free_at)
        w = free_at.index(t)
        n = min(G, remaining)
        remaining -= n
        clock = t + H
        for _ in range(n):
            clock += x
            ends.append(clock)
        free_at[w] = clock
    makespan = max(ends)
    # any worker finishing before the makespan would have asked for work
    for w in range(W):
        if free_at[w] < makespan:
            idle_early = True
    return makespan, idle_early


def single_worker_makespan(S: int, G: int, H: float, x: float) -> float:
    return math.ceil(S / G) * H + S * x


def mixture_mean(components) -> float:
    """``components``: iterable of (weight, rate, shift)."""
    return sum(p * (T + 1.0 / lam) for p, lam, T in components)


# --------------------------------------------------------------------------
# Simplex least squares by exhaustive grid search


def simplex_grid(n: int, steps: int, chunk: int = 400_000):
    """Yield arrays of all points of the simplex with coordinates k/steps."""
    combos = itertools.combinations(range(steps + n - 1), n - 1)
    while True:
        bars = np.fromiter(itertools.chain.from_iterable(itertools.islice(combos, chunk)),
                           dtype=np.int64)
        if bars.size == 0:
            return
        bars = bars.reshape(-1, n - 1)
        # stars and bars: gaps between consecutive bars are the counts
        padded = np.hstack([np.full((len(bars), 1), -1), bars,
                            np.full((len(bars), 1), steps + n - 1)])
        yield np.diff(padded, axis=1).astype(float) - 1.0


def grid_search(A: np.ndarray, y: np.ndarray, step: float = 0.01) -> tuple[float, np.ndarray]:
    """Minimum of ``0.5 * ||y - A p||^2`` over the grid, and its argmin."""
    steps = round(1 / step)
    n = A.shape[1]
    if n == 1:
        p = np.ones(1)
        r = y - A @ p
        return 0.5 * float(r @ r), p
    Q = A.T @ A
    c = A.T @ y
    yy = float(y @ y)
    best, arg = math.inf, None
    for counts in simplex_grid(n, steps):
        P = counts / steps
        f = 0.5 * (np.einsum("ij,jk,ik->i", P, Q, P) - 2 * P @ c + yy)
        i = int(np.argmin(f))
        if f[i] < best:
            best, arg = float(f[i]), P[i].copy()
    return max(best, 0.0), arg


def random_fit_case(seed: int, bins: int = 24):
    """Basis histograms (columns of A) and a target built from known weights."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 6))
    A = rng.gamma(1.0, size=(bins, n))
    A /= A.sum(axis=0)
    w = rng.dirichlet(np.ones(n))
    # some cases put the target on a face of the simplex
    if n > 2 and rng.random() < 0.3:
        w[int(rng.integers(n))] = 0.0
        w /= w.sum()
    y = A @ w
    edges = np.linspace(0.0, float(bins), bins + 1)
    return edges, A, y, w
