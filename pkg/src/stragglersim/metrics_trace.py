"""Run metrics and trace export (JSON and Gantt-style SVG)."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from html import escape
from typing import TYPE_CHECKING

from .trace import (WASTED_OUTCOMES, Downtime, GroupRecord, Outcome, TaskRecord, TaskTrace,
                    record_order)

if TYPE_CHECKING:
    from .sim_engine import SimConfig

SCHEMA_VERSION = 1


class IncompleteTrace(ValueError):
    pass


class ZeroBaseline(ValueError):
    pass


class TraceSchemaError(ValueError):
    pass


@dataclass(frozen=True)
class Metrics:
    makespan: float
    wasted_time: float
    overhead_time: float
    useful_time: float
    utilization: float
    completions: int
    groups: int

    def to_dict(self) -> dict:
        return asdict(self)


def compute_metrics(trace: TaskTrace, config: "SimConfig") -> Metrics:
    """Summarize a finished run.

    Makespan is the latest end over accepted completions.  Overhead and wasted
    time are counted only up to the makespan: a group issued near the end may
    still be in its setup phase, or a copy still running, when the job is done.

    Utilization is useful time over worker-available time up to the makespan
    (``W * makespan`` when no worker ever left).
    """
    done = {r.task for r in trace.records if r.outcome is Outcome.COMPLETED}
    if len(done) < config.num_tasks:
        raise IncompleteTrace(f"{len(done)} of {config.num_tasks} tasks completed")
    makespan = 0.0
    completions = 0
    for r in trace.records:
        if r.outcome is Outcome.COMPLETED:
            completions += 1
            if r.end > makespan:
                makespan = r.end

    def clipped(a, b):
        return min(b, makespan) - min(a, makespan)

    useful = math.fsum(r.end - r.start for r in trace.records if r.outcome is Outcome.COMPLETED)
    wasted = math.fsum(clipped(r.start, r.end) for r in trace.records
                       if r.outcome in WASTED_OUTCOMES)
    overhead = math.fsum(clipped(g.issued_at, g.overhead_end) for g in trace.groups)
    available = config.num_workers * makespan
    available -= math.fsum(clipped(d.start, d.end) for d in trace.downtime)
    utilization = useful / available if available > 0 else 0.0
    return Metrics(makespan, wasted, overhead, useful, utilization, completions, len(trace.groups))


def savings_percent(baseline: float, value: float) -> float:
    """Percent time saved by ``value`` relative to ``baseline``."""
    if not baseline > 0:
        raise ZeroBaseline(f"baseline must be positive, got {baseline!r}")
    return 100.0 * (baseline - value) / baseline


# --------------------------------------------------------------------------
# JSON


def trace_to_dict(trace: TaskTrace) -> dict:
    per_worker = trace.by_worker()
    down: dict[int, list] = {w: [] for w in range(trace.num_workers)}
    for d in sorted(trace.downtime):
        down[d.worker].append([d.start, d.end])
    return {
        "schema_version": SCHEMA_VERSION,
        "num_workers": trace.num_workers,
        "workers": [
            {
                "id": w,
                "intervals": [
                    {"task": r.task, "start": r.start, "end": r.end,
                     "outcome": r.outcome.value, "group_id": r.group_id}
                    for r in per_worker[w]
                ],
                "unavailable": down[w],
            }
            for w in range(trace.num_workers)
        ],
        "groups": [
            {"id": g.group_id, "worker": g.worker, "issued_at": g.issued_at,
             "overhead_end": g.overhead_end, "tasks": list(g.tasks)}
            for g in trace.groups
        ],
    }


def trace_from_dict(raw: dict) -> TaskTrace:
    try:
        if raw.get("schema_version") != SCHEMA_VERSION:
            raise TraceSchemaError(f"unsupported schema_version {raw.get('schema_version')!r}")
        workers = raw["workers"]
        num_workers = int(raw.get("num_workers", len(workers)))
        trace = TaskTrace(num_workers)
        for wrec in workers:
            wid = int(wrec["id"])
            if not 0 <= wid < num_workers:
                raise TraceSchemaError(f"worker id {wid} out of range")
            for iv in wrec["intervals"]:
                trace.records.append(TaskRecord(
                    wid, int(iv["task"]), float(iv["start"]), float(iv["end"]),
                    Outcome(iv["outcome"]), int(iv["group_id"])))
            for s, e in wrec.get("unavailable", []):
                trace.downtime.append(Downtime(wid, float(s), float(e)))
        for g in raw.get("groups", []):
            trace.groups.append(GroupRecord(int(g["id"]), int(g["worker"]), float(g["issued_at"]),
                                            float(g["overhead_end"]), tuple(int(t) for t in g["tasks"])))
    except TraceSchemaError:
        raise
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise TraceSchemaError(f"malformed trace: {exc}") from exc
    trace.records.sort(key=record_order)
    trace.downtime.sort()
    return trace


def load_trace(path) -> TaskTrace:
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise TraceSchemaError(f"not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise TraceSchemaError("trace JSON must be an object")
    return trace_from_dict(raw)


# --------------------------------------------------------------------------
# SVG

PALETTE = ("#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#76b7b2",
           "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac")


def _fmt(v: float) -> str:
    return f"{v:.2f}".rstrip("0").rstrip(".")


def trace_to_svg(trace: TaskTrace, width: int = 1000, row_height: int = 28,
                 title: str | None = None) -> str:
    """Gantt chart: one row per worker, one box per processing interval.

    Boxes are colored by group.  Work cut short (preempted or lost) gets a
    jagged right edge; every discarded copy gets a struck-through label.
    Gaps before a group's first box are the assignment overhead; thick black
    bars mark spans where a worker was out of the cluster.
    """
    left, right, top = 80, 20, 30 if title else 10
    axis_h = 30
    n = trace.num_workers
    height = top + n * row_height + axis_h
    horizon = 0.0
    for r in trace.records:
        horizon = max(horizon, r.end)
    for d in trace.downtime:
        horizon = max(horizon, d.end)
    horizon = horizon or 1.0
    scale = (width - left - right) / horizon
    pad = max(2, row_height // 7)
    box_h = row_height - 2 * pad

    def x(t):
        return left + t * scale

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif">',
        '<style>.label{font-size:10px;text-anchor:middle;dominant-baseline:central}'
        '.struck{text-decoration:line-through}.row-label{font-size:11px;'
        'text-anchor:end;dominant-baseline:central}</style>',
    ]
    if title:
        out.append(f'<text x="{width / 2}" y="18" text-anchor="middle">{escape(title)}</text>')

    by_worker = trace.by_worker()
    for w in range(n):
        y0 = top + w * row_height
        out.append(f'<g class="worker-row" data-worker="{w}">')
        out.append(f'<text class="row-label" x="{left - 6}" y="{_fmt(y0 + row_height / 2)}">'
                   f'worker {w + 1}</text>')
        for r in by_worker.get(w, []):
            if r.outcome is Outcome.SKIPPED or r.end <= r.start:
                continue
            out.extend(_box(r, x(r.start), x(r.end), y0 + pad, box_h))
        out.append("</g>")
    for d in trace.downtime:
        if d.end <= d.start:
            continue
        yc = top + d.worker * row_height + row_height / 2
        out.append(f'<line class="unavailable" x1="{_fmt(x(d.start))}" y1="{_fmt(yc)}" '
                   f'x2="{_fmt(x(d.end))}" y2="{_fmt(yc)}" stroke="black" stroke-width="{pad + 2}"/>')

    # time axis
    ya = top + n * row_height + 4
    out.append(f'<line x1="{left}" y1="{ya}" x2="{width - right}" y2="{ya}" stroke="#444"/>')
    step = _nice_step(horizon / 8)
    t = 0.0
    while t <= horizon + 1e-9:
        out.append(f'<line x1="{_fmt(x(t))}" y1="{ya}" x2="{_fmt(x(t))}" y2="{ya + 4}" stroke="#444"/>'
                   f'<text class="label" x="{_fmt(x(t))}" y="{ya + 14}">{_fmt(t)}</text>')
        t += step
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _box(r: TaskRecord, x0: float, x1: float, y: float, h: float) -> list[str]:
    color = PALETTE[r.group_id % len(PALETTE)]
    cls = f"task {r.outcome.value}"
    parts = []
    if r.outcome in (Outcome.PREEMPTED, Outcome.LOST):
        # zigzag right edge
        teeth = 4
        tooth = min(4.0, (x1 - x0) / 2)
        pts = [(x0, y), (x1, y)]
        for i in range(1, 2 * teeth + 1):
            px = x1 - tooth if i % 2 else x1
            pts.append((px, y + h * i / (2 * teeth)))
        pts.append((x0, y + h))
        coords = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in pts)
        parts.append(f'<polygon class="{cls}" points="{coords}" fill="{color}" '
                     f'fill-opacity="0.55" stroke="#222" stroke-width="0.6"/>')
    else:
        opacity = "0.55" if r.outcome is Outcome.DISCARDED else "0.9"
        parts.append(f'<rect class="{cls}" x="{_fmt(x0)}" y="{_fmt(y)}" width="{_fmt(x1 - x0)}" '
                     f'height="{_fmt(h)}" fill="{color}" fill-opacity="{opacity}" '
                     f'stroke="#222" stroke-width="0.6"/>')
    label_cls = "label struck" if r.outcome in WASTED_OUTCOMES else "label"
    parts.append(f'<text class="{label_cls}" x="{_fmt((x0 + x1) / 2)}" y="{_fmt(y + h / 2)}">'
                 f'{r.task}</text>')
    return parts


def _nice_step(raw: float) -> float:
    if raw <= 0:
        return 1.0
    mag = 10 ** math.floor(math.log10(raw))
    for m in (1, 2, 5, 10):
        if raw <= m * mag:
            return m * mag
    return 10 * mag


def export_trace(trace: TaskTrace, fmt: str, path, *, width: int = 1000,
                 row_height: int = 28, title: str | None = None) -> None:
    """Write ``trace`` as ``"json"`` or ``"svg"``; OSError propagates."""
    fmt = fmt.lower()
    if fmt == "json":
        text = json.dumps(trace_to_dict(trace), indent=1) + "\n"
    elif fmt == "svg":
        text = trace_to_svg(trace, width=width, row_height=row_height, title=title)
    else:
        raise ValueError(f"unknown trace format {fmt!r}")
    with open(path, "w") as fh:
        fh.write(text)
