"""Monte-Carlo harness and parameter sweeps.

Every cell of a sweep runs the same per-repetition seeds
(``master_seed + rep``), so policies and group sizes are compared on paired
draws.  Runs go through the compiled kernel by default; ``engine="reference"``
uses the trace-producing Python engine instead (same numbers, much slower).
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np

from . import sim_engine
from .metrics_trace import savings_percent
from .sim_engine import InvalidConfig, Policy, SimConfig
from .straggler_model import ShiftedExp

log = logging.getLogger(__name__)

LAMBDA_AXIS_SHIFT = 5.0
CSV_HEADER = ("axis", "policy", "group_size", "mean_makespan", "std_makespan",
              "mean_wasted", "savings_vs_g1_pct")


@dataclass(frozen=True)
class MonteCarloResult:
    mean: float
    std: float
    makespans: np.ndarray
    mean_wasted: float

    @property
    def reps(self) -> int:
        return len(self.makespans)


def _run_one(config: SimConfig, engine: str) -> tuple[float, float]:
    if engine == "fast":
        from .fastsim import simulate_fast

        r = simulate_fast(config)
        return r.makespan, r.wasted_time
    if engine == "reference":
        r = sim_engine.run(config)
        return r.makespan, r.metrics.wasted_time
    raise ValueError(f"unknown engine {engine!r}")


def monte_carlo(config: SimConfig, reps: int, master_seed: int = 0,
                engine: str = "fast") -> MonteCarloResult:
    """Run ``reps`` seeds (``master_seed + i``) and summarize the makespans.

    The standard deviation is the sample one (``ddof=1``), zero for a single rep.
    """
    if isinstance(reps, bool) or not isinstance(reps, int) or reps < 1:
        raise InvalidConfig(f"reps must be an integer >= 1, got {reps!r}")
    spans = np.empty(reps)
    wasted = np.empty(reps)
    for i in range(reps):
        spans[i], wasted[i] = _run_one(config.replace(seed=master_seed + i), engine)
    std = float(spans.std(ddof=1)) if reps > 1 else 0.0
    return MonteCarloResult(float(spans.mean()), std, spans, float(wasted.mean()))


# --------------------------------------------------------------------------
# Sweeps


class Axis(str, Enum):
    OVERHEAD = "overhead"
    GROUP_SIZE = "group_size"
    RATIO = "ratio"
    LAMBDA = "lambda"

    @classmethod
    def parse(cls, value) -> "Axis":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_")
        aliases = {"h": "overhead", "g": "group_size", "groupsize": "group_size",
                   "task_to_worker_ratio": "ratio", "tasktoworkerratio": "ratio",
                   "s/w": "ratio", "lam": "lambda"}
        try:
            return cls(aliases.get(key, key))
        except ValueError:
            raise InvalidConfig(f"unknown sweep axis {value!r}") from None


@dataclass(frozen=True)
class SweepSpec:
    base: SimConfig
    axis: Axis
    axis_values: tuple
    policies: tuple[Policy, ...] = (Policy.PROPOSED,)
    group_sizes: tuple[int, ...] = (1,)
    repetitions: int = 10_000
    master_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "axis", Axis.parse(self.axis))
        object.__setattr__(self, "axis_values", tuple(self.axis_values))
        object.__setattr__(self, "policies", tuple(Policy.parse(p) for p in self.policies))
        object.__setattr__(self, "group_sizes", tuple(self.group_sizes))
        self.validate()

    def validate(self) -> None:
        v = self.axis_values
        if not v:
            raise InvalidConfig("axis_values must be non-empty")
        if not all(isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)
                   for x in v):
            raise InvalidConfig("axis_values must be finite numbers")
        pairs = list(zip(v, v[1:]))
        if not (all(a < b for a, b in pairs) or all(a > b for a, b in pairs)):
            raise InvalidConfig("axis_values must be strictly monotone")
        if not self.policies:
            raise InvalidConfig("policies must be non-empty")
        if self.axis is not Axis.GROUP_SIZE and not self.group_sizes:
            raise InvalidConfig("group_sizes must be non-empty")
        for g in self.group_sizes:
            if isinstance(g, bool) or not isinstance(g, int) or g < 1:
                raise InvalidConfig(f"group sizes must be integers >= 1, got {g!r}")
        if self.axis is Axis.GROUP_SIZE and not all(isinstance(x, int) and x >= 1 for x in v):
            raise InvalidConfig("group_size axis values must be integers >= 1")
        if self.axis in (Axis.OVERHEAD, Axis.RATIO, Axis.LAMBDA):
            lo = min(v)
            if lo < 0 or (self.axis is not Axis.OVERHEAD and lo <= 0):
                raise InvalidConfig(f"{self.axis.value} axis values out of range")
        if isinstance(self.repetitions, bool) or not isinstance(self.repetitions, int) \
                or self.repetitions < 1:
            raise InvalidConfig("repetitions must be an integer >= 1")

    def config_at(self, value) -> SimConfig:
        """Base config with the swept parameter set to ``value``."""
        base = self.base
        if self.axis is Axis.OVERHEAD:
            return base.replace(overhead=float(value))
        if self.axis is Axis.GROUP_SIZE:
            return base.replace(group_size=int(value))
        if self.axis is Axis.RATIO:
            return base.replace(num_tasks=max(1, round(value * base.num_workers)))
        return base.replace(task_time=ShiftedExp(float(value), LAMBDA_AXIS_SHIFT))

    def cells(self) -> list[tuple]:
        """``(axis_value, policy, group_size)`` in output order.

        The G=1 cell of each policy is always included since savings are
        measured against it.  Standard replication only has a G=1 cell.  On
        the group-size axis each value is its own cell.
        """
        out = []
        for v in self.axis_values:
            if self.axis is Axis.GROUP_SIZE:
                sizes = [int(v)]
            else:
                sizes = sorted(set(self.group_sizes) | {1})
            for p in self.policies:
                for g in ([1] if p is Policy.STANDARD else sizes):
                    out.append((v, p, g))
        return out

    def baseline_of(self, cell: tuple) -> tuple:
        v, p, _ = cell
        return (1, p, 1) if self.axis is Axis.GROUP_SIZE else (v, p, 1)


@dataclass(frozen=True)
class SweepRow:
    axis_value: float
    policy: Policy
    group_size: int
    mean_makespan: float
    std_makespan: float
    mean_wasted: float
    savings_vs_g1: float


@dataclass
class SweepResult:
    axis: Axis
    rows: list[SweepRow] = field(default_factory=list)
    repetitions: int = 0
    master_seed: int = 0
    monotonicity_violations: list[tuple] = field(default_factory=list)

    def cell(self, axis_value, policy, group_size) -> SweepRow:
        policy = Policy.parse(policy)
        for r in self.rows:
            if r.axis_value == axis_value and r.policy is policy and r.group_size == group_size:
                return r
        raise KeyError((axis_value, policy, group_size))

    def series(self, policy, group_size) -> list[SweepRow]:
        """Rows of one (policy, G) curve, in axis order.

        On the group-size axis every row has its own G, so ``group_size`` is
        ignored there.
        """
        policy = Policy.parse(policy)
        return [r for r in self.rows if r.policy is policy
                and (self.axis is Axis.GROUP_SIZE or r.group_size == group_size)]

    def to_dict(self) -> dict:
        return {
            "axis": self.axis.value,
            "repetitions": self.repetitions,
            "master_seed": self.master_seed,
            "rows": [
                {"axis_value": r.axis_value, "policy": r.policy.value, "group_size": r.group_size,
                 "mean_makespan": r.mean_makespan, "std_makespan": r.std_makespan,
                 "mean_wasted": r.mean_wasted, "savings_vs_g1_pct": r.savings_vs_g1}
                for r in self.rows
            ],
        }


def sweep(spec: SweepSpec, engine: str = "fast",
          progress: Callable[[int, int], None] | None = None) -> SweepResult:
    """Fill every cell of ``spec`` by Monte-Carlo simulation."""
    cells = spec.cells()
    todo = list(dict.fromkeys(cells + [spec.baseline_of(c) for c in cells]))
    stats: dict[tuple, MonteCarloResult] = {}
    for i, (v, p, g) in enumerate(todo):
        cfg = spec.config_at(v).replace(policy=p, group_size=g)
        stats[(v, p, g)] = monte_carlo(cfg, spec.repetitions, spec.master_seed, engine)
        if progress is not None:
            progress(i + 1, len(todo))

    result = SweepResult(spec.axis, repetitions=spec.repetitions, master_seed=spec.master_seed)
    for v, p, g in cells:
        mc = stats[(v, p, g)]
        base = stats[spec.baseline_of((v, p, g))].mean
        result.rows.append(SweepRow(v, p, g, mc.mean, mc.std, mc.mean_wasted,
                                    savings_percent(base, mc.mean)))
    if spec.axis is Axis.OVERHEAD:
        result.monotonicity_violations = overhead_violations(result)
        for p, g, a, b in result.monotonicity_violations:
            log.warning("mean makespan fell from H=%s to H=%s for %s G=%d", a, b, p.value, g)
    return result


def overhead_violations(result: SweepResult) -> list[tuple]:
    """(policy, G, H_a, H_b) pairs where the mean makespan drops as H grows."""
    out = []
    curves: dict[tuple, list[SweepRow]] = {}
    for r in result.rows:
        curves.setdefault((r.policy, r.group_size), []).append(r)
    for (p, g), rows in curves.items():
        rows = sorted(rows, key=lambda r: r.axis_value)
        for a, b in zip(rows, rows[1:]):
            if b.mean_makespan < a.mean_makespan:
                out.append((p, g, a.axis_value, b.axis_value))
    return out


def _csv_rows(result: SweepResult) -> list[list]:
    return [[repr(r.axis_value), r.policy.value, r.group_size, repr(r.mean_makespan),
             repr(r.std_makespan), repr(r.mean_wasted), repr(r.savings_vs_g1)]
            for r in result.rows]


def write_csv(result: SweepResult, path) -> None:
    """One row per cell under :data:`CSV_HEADER`; the ``axis`` column holds the
    swept value.  Output is byte-identical for identical results."""
    if not result.rows:
        raise ValueError("empty sweep result")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        w.writerows(_csv_rows(result))


def write_json(result: SweepResult, path) -> None:
    with open(path, "w") as fh:
        json.dump(result.to_dict(), fh, indent=1)
        fh.write("\n")

