"""Master-side bookkeeping for group replication.

The master keeps an ordered list of unassigned tasks and an ordered list of
assigned-but-incomplete tasks.  An idle worker receives a group: fresh tasks
taken from the head of the unassigned list, topped up with replicas of
assigned tasks when fewer than ``group_size`` fresh tasks remain.  The first
reported completion of a task is accepted and every other holder is told to
skip it.

Nothing here knows about time or workers beyond their ids, so the same state
machine drives the simulator and the unit tests.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence


class SchedulerError(ValueError):
    pass


class InvalidParam(SchedulerError):
    pass


class UnknownTask(SchedulerError):
    pass


class EmptyCandidates(SchedulerError):
    pass


@dataclass(frozen=True)
class GroupAssignment:
    worker: int
    fresh: tuple[int, ...]
    replicas: tuple[int, ...]
    issued_at: float = 0.0

    @property
    def tasks(self) -> tuple[int, ...]:
        """Processing order: the fresh prefix, then the shuffled replicas."""
        return self.fresh + self.replicas

    def __len__(self) -> int:
        return len(self.fresh) + len(self.replicas)


@dataclass(frozen=True)
class SkipSignal:
    task: int
    at: float


class _NoWork:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "NoWork"

    def __bool__(self):
        return False


NoWork = _NoWork()


@dataclass
class MasterState:
    num_tasks: int
    group_size: int
    unassigned: deque = field(default_factory=deque)
    # insertion-ordered set of assigned, incomplete tasks
    assigned: dict = field(default_factory=dict)
    replica_count: list = field(default_factory=list)
    completed: set = field(default_factory=set)
    fresh_issued: int = 0

    def is_done(self) -> bool:
        return not self.unassigned and not self.assigned

    def assign_group(self, worker: int, rng: random.Random,
                     shuffle_rng: random.Random | None = None,
                     now: float = 0.0) -> GroupAssignment | _NoWork:
        return assign_group(self, worker, rng, shuffle_rng, now)

    def mark_task_complete(self, task: int, now: float = 0.0) -> list[SkipSignal]:
        return mark_task_complete(self, task, now)

    def requeue(self, tasks: Sequence[int]) -> None:
        requeue(self, tasks)

    def check(self) -> None:
        """Assert the partition invariant (used by tests)."""
        u, a, c = set(self.unassigned), set(self.assigned), self.completed
        assert len(u) == len(self.unassigned), "duplicate in unassigned"
        assert not (u & a or u & c or a & c), "task lists overlap"
        assert len(u) + len(a) + len(c) == self.num_tasks, "tasks lost"
        assert all(self.replica_count[t] >= 1 for t in a)


def new_master(num_tasks: int, group_size: int) -> MasterState:
    if not isinstance(num_tasks, int) or num_tasks < 1:
        raise InvalidParam(f"num_tasks must be >= 1, got {num_tasks!r}")
    if not isinstance(group_size, int) or group_size < 1:
        raise InvalidParam(f"group_size must be >= 1, got {group_size!r}")
    return MasterState(
        num_tasks=num_tasks,
        group_size=group_size,
        unassigned=deque(range(num_tasks)),
        replica_count=[0] * num_tasks,
    )


def select_replica(candidates: Iterable[int], replica_count: Sequence[int],
                   rng: random.Random) -> int:
    """Least-replicated candidate; ties broken uniformly at random.

    ``candidates`` should be iterated in a deterministic order (the master
    passes its assigned list) so that a seeded ``rng`` reproduces the pick.
    """
    best = None
    ties: list[int] = []
    for t in candidates:
        n = replica_count[t]
        if best is None or n < best:
            best = n
            ties = [t]
        elif n == best:
            ties.append(t)
    if not ties:
        raise EmptyCandidates("no task available to replicate")
    if len(ties) == 1:
        return ties[0]
    return ties[rng.randrange(len(ties))]


def assign_group(state: MasterState, worker: int, rng: random.Random,
                 shuffle_rng: random.Random | None = None,
                 now: float = 0.0) -> GroupAssignment | _NoWork:
    """Form the next group for an idle worker, or return ``NoWork``.

    Replica candidates are the assigned tasks not already in this group
    (neither among its fresh tasks nor among the replicas picked so far).
    """
    if state.is_done():
        return NoWork
    G = state.group_size
    unassigned, assigned = state.unassigned, state.assigned
    fresh = []
    while unassigned and len(fresh) < G:
        t = unassigned.popleft()
        fresh.append(t)
        assigned[t] = None
    state.fresh_issued += len(fresh)

    need = G - len(fresh)
    replicas: list[int] = []
    if need > 0 and len(assigned) > len(fresh):
        replicas = _pick_replicas(assigned, set(fresh), state.replica_count, need, rng)
        if len(replicas) > 1:
            (shuffle_rng or rng).shuffle(replicas)

    counts = state.replica_count
    for t in fresh:
        counts[t] += 1
    for t in replicas:
        counts[t] += 1
    return GroupAssignment(worker, tuple(fresh), tuple(replicas), now)


def _pick_replicas(assigned, exclude: set, counts, need: int, rng) -> list[int]:
    """Repeated :func:`select_replica` over the shrinking candidate set.

    Candidates are bucketed by replica count once (each bucket in assigned
    order), so every pick sees exactly the tie list the one-at-a-time version
    would and draws the same random index from ``rng``.
    """
    tiers: dict[int, list[int]] = {}
    for t in assigned:
        if t not in exclude:
            tiers.setdefault(counts[t], []).append(t)
    picks: list[int] = []
    for n in sorted(tiers):
        tier = tiers[n]
        while tier and len(picks) < need:
            if len(tier) == 1:
                picks.append(tier.pop())
            else:
                picks.append(tier.pop(rng.randrange(len(tier))))
        if len(picks) == need:
            break
    return picks


def mark_task_complete(state: MasterState, task: int, now: float = 0.0) -> list[SkipSignal]:
    """Accept the first completion of ``task``; later calls are no-ops."""
    if not 0 <= task < state.num_tasks:
        raise UnknownTask(f"task {task} outside [0, {state.num_tasks})")
    if task in state.completed:
        return []
    if task in state.assigned:
        del state.assigned[task]
    else:
        # Only reachable by misuse: completing a task never handed out.
        try:
            state.unassigned.remove(task)
        except ValueError:
            pass
    state.completed.add(task)
    return [SkipSignal(task, now)]


def requeue(state: MasterState, tasks: Sequence[int]) -> None:
    """Move incomplete ``tasks`` from the assigned list back to the front of
    the unassigned list, keeping their relative order."""
    back = [t for t in dict.fromkeys(tasks) if t in state.assigned]
    for t in back:
        del state.assigned[t]
    state.unassigned.extendleft(reversed(back))
