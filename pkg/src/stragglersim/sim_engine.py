"""Discrete-event simulation of a master and ``W`` workers.

A worker that becomes idle asks the master for a group, pays the assignment
overhead ``H`` once, draws a single per-task time ``X`` for the whole group,
and then processes the group's tasks one after another, each taking ``X``.

Three policies are simulated:

* ``PROPOSED``: the worker reports every task as soon as it finishes it, and
  the master immediately tells every other holder to skip that task.
* ``GROUPING_ONLY``: the worker reports only when its whole group is done;
  skip signals still prune or abort other holders' copies.
* ``STANDARD``: classic replication, i.e. ``PROPOSED`` with group size 1.

Optionally workers leave and rejoin the cluster with exponentially
distributed available/unavailable spans.
"""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterator, Sequence

from . import rng as rngmod
from .scheduler import MasterState, new_master
from .straggler_model import Deterministic, Distribution, MixtureModel, ShiftedExp, sample
from .trace import Downtime, GroupRecord, Outcome, TaskRecord, TaskTrace, record_order


class InvalidConfig(ValueError):
    pass


class EmptyQueue(IndexError):
    pass


class Policy(str, Enum):
    STANDARD = "standard"
    GROUPING_ONLY = "grouping_only"
    PROPOSED = "proposed"

    @classmethod
    def parse(cls, value) -> "Policy":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_")
        aliases = {"groupingonly": "grouping_only", "grouping": "grouping_only"}
        try:
            return cls(aliases.get(key, key))
        except ValueError:
            raise InvalidConfig(f"unknown policy {value!r}") from None


@dataclass(frozen=True)
class Elasticity:
    rate_available: float    # lambda_A; mean available span is 1 / rate
    rate_unavailable: float  # lambda_U

    def __post_init__(self):
        for name in ("rate_available", "rate_unavailable"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and v > 0 and math.isfinite(v)):
                raise InvalidConfig(f"{name} must be a positive rate, got {v!r}")


@dataclass(frozen=True)
class SimConfig:
    num_workers: int
    num_tasks: int
    group_size: int = 1
    overhead: float = 0.0
    policy: Policy = Policy.PROPOSED
    task_time: Distribution = field(default_factory=lambda: Deterministic(1.0))
    elasticity: Elasticity | None = None
    seed: int = 0
    # grouping-only only: whether a skip signal aborts a copy already in
    # progress (True) or only drops copies that have not started yet
    preempt_in_flight: bool = True

    def __post_init__(self):
        object.__setattr__(self, "policy", Policy.parse(self.policy))
        self.validate()

    def validate(self) -> None:
        for name in ("num_workers", "num_tasks", "group_size"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int) or v < 1:
                raise InvalidConfig(f"{name} must be an integer >= 1, got {v!r}")
        if not (isinstance(self.overhead, (int, float)) and self.overhead >= 0
                and math.isfinite(self.overhead)):
            raise InvalidConfig(f"overhead must be >= 0, got {self.overhead!r}")
        if not isinstance(self.task_time, (ShiftedExp, MixtureModel, Deterministic)):
            raise InvalidConfig(f"unsupported task_time {self.task_time!r}")
        if self.elasticity is not None and not isinstance(self.elasticity, Elasticity):
            raise InvalidConfig("elasticity must be an Elasticity or None")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int):
            raise InvalidConfig(f"seed must be an integer, got {self.seed!r}")
        if not isinstance(self.preempt_in_flight, bool):
            raise InvalidConfig("preempt_in_flight must be a boolean")

    @property
    def effective_group_size(self) -> int:
        return 1 if self.policy is Policy.STANDARD else self.group_size

    def replace(self, **changes) -> "SimConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class SimResult:
    config: SimConfig
    trace: TaskTrace
    makespan: float
    metrics: "Metrics"  # noqa: F821


# --------------------------------------------------------------------------
# Availability


class AvailabilitySchedule:
    """Per-worker alternating (available span, unavailable span) pairs.

    Spans are drawn lazily so that the schedule always covers the run.
    Each worker has its own stream, so spans do not depend on event order.
    A worker with no spans (or whose fixed list is exhausted) stays available.
    """

    def __init__(self, num_workers: int, elasticity: Elasticity | None = None,
                 seed: int = 0, fixed: dict[int, Sequence[tuple[float, float]]] | None = None):
        self.num_workers = num_workers
        self.elasticity = elasticity
        self._spans: list[list[tuple[float, float]]] = [[] for _ in range(num_workers)]
        self._fixed = fixed is not None
        if fixed is not None:
            for w, spans in fixed.items():
                for a, u in spans:
                    if not (a > 0 and u > 0):
                        raise InvalidConfig("availability spans must be positive")
                self._spans[w] = list(spans)
        self._streams = None
        if elasticity is not None and fixed is None:
            self._streams = [rngmod.stream(seed, rngmod.AVAILABILITY, w) for w in range(num_workers)]

    @classmethod
    def always(cls, num_workers: int) -> "AvailabilitySchedule":
        return cls(num_workers)

    @property
    def is_elastic(self) -> bool:
        return self._streams is not None or (self._fixed and any(self._spans))

    def span(self, worker: int, k: int) -> tuple[float, float] | None:
        """The ``k``-th (available, unavailable) pair of ``worker``."""
        spans = self._spans[worker]
        if self._streams is not None:
            r = self._streams[worker]
            e = self.elasticity
            while len(spans) <= k:
                spans.append((r.expovariate(e.rate_available), r.expovariate(e.rate_unavailable)))
        return spans[k] if k < len(spans) else None

    def spans(self, worker: int) -> Iterator[tuple[float, float]]:
        k = 0
        while (s := self.span(worker, k)) is not None:
            yield s
            k += 1


def build_availability(config: SimConfig, seed: int | None = None) -> AvailabilitySchedule:
    """Schedule for ``config``; everyone always available without elasticity."""
    if config.elasticity is None:
        return AvailabilitySchedule.always(config.num_workers)
    return AvailabilitySchedule(config.num_workers, config.elasticity,
                                config.seed if seed is None else seed)


# --------------------------------------------------------------------------
# Event queue

COMPLETION, DEPARTURE, JOIN, ASSIGNMENT = 0, 1, 2, 3
EVENT_NAMES = {COMPLETION: "completion", DEPARTURE: "departure", JOIN: "join",
               ASSIGNMENT: "assignment"}


class EventQueue:
    """Min-heap of ``(time, kind, worker, seq, version)``.

    Simultaneous events pop in kind order (completion, departure, join,
    assignment), then by ascending worker id.
    """

    def __init__(self):
        self._heap: list[tuple] = []
        self._seq = 0

    def push(self, time: float, kind: int, worker: int, version: int = 0) -> None:
        self._seq += 1
        heapq.heappush(self._heap, (time, kind, worker, self._seq, version))

    def __len__(self):
        return len(self._heap)

    def __bool__(self):
        return bool(self._heap)


def next_event(queue: EventQueue) -> tuple:
    if not queue._heap:
        raise EmptyQueue("event queue is empty")
    return heapq.heappop(queue._heap)


# --------------------------------------------------------------------------
# Simulation


class WorkerState:
    __slots__ = ("id", "group_id", "tasks", "x", "start", "overhead_end", "version",
                 "available", "busy", "local_done", "down_since", "cycle")

    def __init__(self, wid: int):
        self.id = wid
        self.group_id = -1
        self.tasks: list[int] = []     # remaining tasks; tasks[0] is current
        self.x = 0.0                   # per-task time of the current group
        self.start = 0.0               # start of the current task
        self.overhead_end = 0.0
        self.version = 0               # bumps invalidate queued events
        self.available = True
        self.busy = False
        self.local_done: list[tuple[int, float, float]] = []  # unreported (grouping-only)
        self.down_since = 0.0
        self.cycle = 0                 # index into the availability schedule


class Simulation:
    """One run; construct, then call :meth:`run` (or :meth:`step` repeatedly)."""

    def __init__(self, config: SimConfig, availability: AvailabilitySchedule | None = None):
        config.validate()
        self.config = config
        self.G = config.effective_group_size
        self.H = float(config.overhead)
        self.report_each_task = config.policy is not Policy.GROUPING_ONLY
        self.preempt = self.report_each_task or config.preempt_in_flight
        self.master: MasterState = new_master(config.num_tasks, self.G)
        self.time_rng = rngmod.stream(config.seed, rngmod.TASK_TIME)
        self.pick_rng = rngmod.stream(config.seed, rngmod.REPLICA_PICK)
        self.shuffle_rng = rngmod.stream(config.seed, rngmod.REPLICA_SHUFFLE)
        self.availability = availability or build_availability(config)
        self.workers = [WorkerState(w) for w in range(config.num_workers)]
        self.holders: list[set[int]] = [set() for _ in range(config.num_tasks)]
        self.queue = EventQueue()
        self.trace = TaskTrace(config.num_workers)
        self._group_meta: list[list] = []  # [worker, issued_at, overhead_end, tasks]
        self.now = 0.0
        self.makespan: float | None = None
        self._accepted = 0
        self._last_end = 0.0
        self._reports: deque = deque()

        for w in self.workers:
            self.queue.push(0.0, ASSIGNMENT, w.id, w.version)
            span = self.availability.span(w.id, 0)
            if span is not None:
                self.queue.push(span[0], DEPARTURE, w.id)

    # -- driving -----------------------------------------------------------

    @property
    def done(self) -> bool:
        return self.makespan is not None

    def step(self) -> tuple | None:
        """Process one event; returns it (or ``None`` once finished)."""
        if self.done:
            return None
        ev = next_event(self.queue)
        t, kind, wid, _, version = ev
        self.now = t
        w = self.workers[wid]
        if kind == COMPLETION:
            if version == w.version:
                self._on_task_end(w, t)
        elif kind == ASSIGNMENT:
            if version == w.version and w.available and not w.busy:
                self._on_assign(w, t)
        elif kind == DEPARTURE:
            self.apply_departure(wid, t)
        else:
            self._on_join(w, t)
        return ev

    def run(self) -> SimResult:
        from .metrics_trace import compute_metrics

        queue = self.queue
        while not self.done:
            if not queue:
                raise RuntimeError("simulation stalled with work remaining")
            self.step()
        self._finalize()
        return SimResult(self.config, self.trace, self.makespan,
                         compute_metrics(self.trace, self.config))

    # -- handlers ------------------------------------------------------------

    def _on_assign(self, w: WorkerState, t: float) -> None:
        g = self.master.assign_group(w.id, self.pick_rng, self.shuffle_rng, t)
        if not g:
            return
        gid = len(self._group_meta)
        tasks = list(g.tasks)
        self._group_meta.append([w.id, t, t + self.H, g.tasks])
        w.group_id = gid
        w.tasks = tasks
        w.busy = True
        w.local_done = []
        w.x = sample(self.config.task_time, self.time_rng)
        w.overhead_end = w.start = t + self.H
        holders = self.holders
        for task in tasks:
            holders[task].add(w.id)
        self.queue.push(w.start + w.x, COMPLETION, w.id, w.version)

    def _on_task_end(self, w: WorkerState, t: float) -> None:
        task = w.tasks.pop(0)
        if self.report_each_task:
            self._accept(w, task, w.start, t, t)
        else:
            w.local_done.append((task, w.start, t))
        self._advance(w, t)
        if self._reports:
            self._drain_reports(t)

    def _accept(self, w: WorkerState, task: int, start: float, end: float, now: float) -> None:
        records = self.trace.records
        holders = self.holders[task]
        if self.master.mark_task_complete(task, now):
            records.append(TaskRecord(w.id, task, start, end, Outcome.COMPLETED, w.group_id))
            self._accepted += 1
            if end > self._last_end:
                self._last_end = end
            others = [h for h in holders if h != w.id]
            holders.clear()
            for h in sorted(others):
                self._skip(self.workers[h], task, now)
            if self._accepted == self.config.num_tasks:
                # the latest accepted finish; for grouping-only runs the final
                # report can reach the master a little later than that
                self.makespan = self._last_end
        else:
            records.append(TaskRecord(w.id, task, start, end, Outcome.DISCARDED, w.group_id))
            holders.discard(w.id)

    def _skip(self, w: WorkerState, task: int, now: float) -> None:
        tasks = w.tasks
        if not tasks:
            return
        if tasks[0] == task:
            if now > w.start and not self.preempt:
                return  # let it finish; the eventual report is discarded
            if now > w.start:
                outcome, start = Outcome.PREEMPTED, w.start
            else:
                outcome, start = Outcome.SKIPPED, now
            self.trace.records.append(TaskRecord(w.id, task, start, now, outcome, w.group_id))
            tasks.pop(0)
            w.version += 1
            self._advance(w, now)
        elif task in tasks:
            tasks.remove(task)
            self.trace.records.append(TaskRecord(w.id, task, now, now, Outcome.SKIPPED, w.group_id))
        # otherwise already processed locally and awaiting the group report

    def _advance(self, w: WorkerState, now: float) -> None:
        if w.tasks:
            w.start = now if now > w.overhead_end else w.overhead_end
            self.queue.push(w.start + w.x, COMPLETION, w.id, w.version)
            return
        # group finished; a grouping-only worker now reports everything at once
        end = now if now > w.overhead_end else w.overhead_end
        w.busy = False
        if w.local_done:
            self._reports.append((w, w.local_done))
            w.local_done = []
        w.version += 1
        self.queue.push(end, ASSIGNMENT, w.id, w.version)

    def _drain_reports(self, now: float) -> None:
        # Reports are handled whole and in arrival order; skips caused by one
        # report may end other groups, whose reports queue up behind it.
        reports = self._reports
        while reports:
            w, done = reports.popleft()
            for task, s, e in done:
                self._accept(w, task, s, e, now)

    def apply_departure(self, wid: int, at: float) -> list[int]:
        """Take worker ``wid`` out of the cluster at time ``at``.

        Work in progress and unreported results are lost.  Group tasks that no
        other worker holds go back to the front of the unassigned list; the
        returned list holds those tasks.
        """
        w = self.workers[wid]
        if not w.available:
            return []
        returned: list[int] = []
        if w.group_id >= 0:
            meta = self._group_meta[w.group_id]
            if at < meta[2]:
                meta[2] = at
        if w.busy:
            gid = w.group_id
            records = self.trace.records
            for task, s, e in w.local_done:
                records.append(TaskRecord(wid, task, s, e, Outcome.LOST, gid))
            if w.tasks and at > w.start:
                records.append(TaskRecord(wid, w.tasks[0], w.start, at, Outcome.LOST, gid))
            held = set(w.tasks)
            held.update(t for t, _, _ in w.local_done)
            completed = self.master.completed
            for task in meta[3]:
                if task in held:
                    self.holders[task].discard(wid)
                    if not self.holders[task] and task not in completed:
                        returned.append(task)
            self.master.requeue(returned)
            w.tasks = []
            w.local_done = []
            w.busy = False
        w.available = False
        w.version += 1
        w.down_since = at
        span = self.availability.span(wid, w.cycle)
        if span is not None:  # a departure outside the schedule is permanent
            self.queue.push(at + span[1], JOIN, wid)
        return returned

    def _on_join(self, w: WorkerState, t: float) -> None:
        self.trace.downtime.append(Downtime(w.id, w.down_since, t))
        w.available = True
        w.cycle += 1
        w.version += 1
        self.queue.push(t, ASSIGNMENT, w.id, w.version)
        span = self.availability.span(w.id, w.cycle)
        if span is not None:
            self.queue.push(t + span[0], DEPARTURE, w.id)

    def _finalize(self) -> None:
        end = self.makespan
        records = self.trace.records
        for w in self.workers:
            # results computed locally but never reported before the run ended
            for task, s, e in w.local_done:
                records.append(TaskRecord(w.id, task, s, e, Outcome.DISCARDED, w.group_id))
            w.local_done = []
            if not w.available:
                self.trace.downtime.append(Downtime(w.id, w.down_since, max(end, w.down_since)))
        records.sort(key=record_order)
        self.trace.downtime.sort()
        self.trace.groups = [
            GroupRecord(gid, m[0], m[1], m[2], tuple(m[3]))
            for gid, m in enumerate(self._group_meta)
        ]


def run(config: SimConfig, availability: AvailabilitySchedule | None = None) -> SimResult:
    """Simulate ``config`` to completion."""
    return Simulation(config, availability).run()
