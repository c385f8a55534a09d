"""TOML run and sweep manifests.

A run manifest is a flat table::

    workers = 31
    tasks = 392
    group_size = 10
    overhead = 0.0
    policy = "proposed"
    distribution = "I2"            # or {deterministic = 6.0}
                                   # or [{weight = 1.0, lambda = 0.15, shift = 6.0}]
    seed = 1
    repetitions = 10000            # used by sweeps; ignored by a single run

    [elasticity]                   # optional
    rate_available = 0.01
    rate_unavailable = 0.1

A sweep manifest adds a ``[sweep]`` table with ``axis``, ``values``,
``policies``, ``group_sizes`` and optionally ``master_seed``.  Unknown keys
are rejected everywhere.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .experiments import SweepSpec
from .sim_engine import Elasticity, InvalidConfig, SimConfig
from .straggler_model import ModelError, distribution_from_dict


class ManifestError(ValueError):
    """Malformed or invalid manifest (maps to exit code 1)."""


RUN_KEYS = {"workers", "tasks", "group_size", "overhead", "policy", "distribution",
            "elasticity", "seed", "repetitions", "preempt_in_flight", "title"}
ELASTIC_KEYS = {"rate_available", "rate_unavailable"}
SWEEP_KEYS = {"axis", "values", "policies", "group_sizes", "master_seed", "repetitions"}
REQUIRED = ("workers", "tasks", "distribution")


@dataclass(frozen=True)
class RunManifest:
    config: SimConfig
    repetitions: int = 10_000
    title: str | None = None


def _reject_unknown(table: dict, allowed: set, where: str) -> None:
    extra = sorted(set(table) - allowed)
    if extra:
        raise ManifestError(f"unknown key(s) in {where}: {', '.join(extra)}")


def parse_run(raw: dict, where: str = "manifest") -> RunManifest:
    _reject_unknown(raw, RUN_KEYS, where)
    missing = [k for k in REQUIRED if k not in raw]
    if missing:
        raise ManifestError(f"missing key(s) in {where}: {', '.join(missing)}")
    try:
        el = None
        if "elasticity" in raw:
            table = raw["elasticity"]
            if not isinstance(table, dict):
                raise ManifestError("elasticity must be a table")
            _reject_unknown(table, ELASTIC_KEYS, "elasticity")
            el = Elasticity(float(table["rate_available"]), float(table["rate_unavailable"]))
        config = SimConfig(
            num_workers=raw["workers"],
            num_tasks=raw["tasks"],
            group_size=raw.get("group_size", 1),
            overhead=raw.get("overhead", 0.0),
            policy=raw.get("policy", "proposed"),
            task_time=distribution_from_dict(raw["distribution"]),
            elasticity=el,
            seed=raw.get("seed", 0),
            preempt_in_flight=raw.get("preempt_in_flight", True),
        )
        reps = raw.get("repetitions", 10_000)
        if isinstance(reps, bool) or not isinstance(reps, int) or reps < 1:
            raise ManifestError(f"repetitions must be an integer >= 1, got {reps!r}")
    except ManifestError:
        raise
    except (InvalidConfig, ModelError, KeyError, TypeError, ValueError) as exc:
        raise ManifestError(f"{where}: {exc}") from exc
    title = raw.get("title")
    return RunManifest(config, reps, None if title is None else str(title))


def parse_sweep(raw: dict, where: str = "manifest") -> SweepSpec:
    raw = dict(raw)
    table = raw.pop("sweep", None)
    if not isinstance(table, dict):
        raise ManifestError(f"{where}: a sweep manifest needs a [sweep] table")
    _reject_unknown(table, SWEEP_KEYS, "[sweep]")
    run = parse_run(raw, where)
    try:
        return SweepSpec(
            base=run.config,
            axis=table["axis"],
            axis_values=table["values"],
            policies=table.get("policies", ["proposed"]),
            group_sizes=table.get("group_sizes", [1]),
            repetitions=table.get("repetitions", run.repetitions),
            master_seed=table.get("master_seed", run.config.seed),
        )
    except (InvalidConfig, KeyError, TypeError, ValueError) as exc:
        raise ManifestError(f"{where}: {exc}") from exc


def read_toml(path) -> dict:
    """Parse ``path``; OSError propagates, syntax errors become ManifestError."""
    with open(path, "rb") as fh:
        try:
            return tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ManifestError(f"{path}: {exc}") from exc


def load_run_manifest(path) -> RunManifest:
    return parse_run(read_toml(path), str(path))


def load_sweep_manifest(path) -> SweepSpec:
    return parse_sweep(read_toml(path), str(path))
