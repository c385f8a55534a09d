"""Execution traces produced by the simulator."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple


class Outcome(str, Enum):
    COMPLETED = "completed"   # accepted result
    SKIPPED = "skipped"       # dropped before it started; zero duration
    PREEMPTED = "preempted"   # abandoned mid-processing on a skip signal
    LOST = "lost"             # in progress (or unreported) when the worker left
    DISCARDED = "discarded"   # ran to completion but another copy was accepted first


WASTED_OUTCOMES = frozenset({Outcome.PREEMPTED, Outcome.LOST, Outcome.DISCARDED})


class TaskRecord(NamedTuple):
    worker: int
    task: int
    start: float
    end: float
    outcome: Outcome
    group_id: int

    @property
    def duration(self) -> float:
        return self.end - self.start


def record_order(r: TaskRecord):
    return (r.worker, r.start, r.end, r.task, r.group_id)


class GroupRecord(NamedTuple):
    group_id: int
    worker: int
    issued_at: float
    overhead_end: float
    tasks: tuple[int, ...]

    @property
    def overhead(self) -> float:
        return self.overhead_end - self.issued_at


class Downtime(NamedTuple):
    worker: int
    start: float
    end: float


@dataclass
class TaskTrace:
    num_workers: int
    records: list[TaskRecord] = field(default_factory=list)
    groups: list[GroupRecord] = field(default_factory=list)
    downtime: list[Downtime] = field(default_factory=list)

    def by_worker(self) -> dict[int, list[TaskRecord]]:
        out: dict[int, list[TaskRecord]] = {w: [] for w in range(self.num_workers)}
        for r in self.records:
            out[r.worker].append(r)
        for recs in out.values():
            recs.sort(key=lambda r: (r.start, r.end, r.task))
        return out

    def completed(self) -> list[TaskRecord]:
        return [r for r in self.records if r.outcome is Outcome.COMPLETED]

    def intervals(self) -> list[TaskRecord]:
        """Records that occupied a worker for a positive amount of time."""
        return [r for r in self.records if r.outcome is not Outcome.SKIPPED and r.end > r.start]
