import random
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stragglersim.scheduler import (EmptyCandidates, InvalidParam, NoWork, SkipSignal,
                                    UnknownTask, _pick_replicas, assign_group, mark_task_complete,
                                    new_master, select_replica)


def test_new_master_examples():
    m = new_master(3, 1)
    assert list(m.unassigned) == [0, 1, 2] and not m.assigned
    assert len(new_master(30, 3).unassigned) == 30
    for bad in [(0, 1), (3, 0), (-1, 2)]:
        with pytest.raises(InvalidParam):
            new_master(*bad)


def test_assign_fresh_then_replicas():
    m = new_master(6, 4)
    rng = random.Random(0)
    g = assign_group(m, 0, rng)
    assert g.fresh == (0, 1, 2, 3) and g.replicas == ()
    g = assign_group(m, 1, rng)
    assert g.fresh == (4, 5)
    assert len(g.replicas) == 2 and set(g.replicas) <= {0, 1, 2, 3}
    assert len(set(g.tasks)) == 4


def test_assign_nothing_to_replicate():
    m = new_master(8, 3)
    for t in range(7):
        m.unassigned.popleft()
        m.completed.add(t)
    g = assign_group(m, 0, random.Random(0))
    assert g.fresh == (7,) and g.replicas == ()


def test_no_work():
    m = new_master(1, 1)
    assign_group(m, 0, random.Random(0))
    mark_task_complete(m, 0)
    assert assign_group(m, 1, random.Random(0)) is NoWork
    assert not NoWork


def test_select_replica_examples():
    assert select_replica({3, 9}, {3: 2, 9: 1}, random.Random(0)) == 9
    assert select_replica([3], {3: 5}, random.Random(0)) == 3
    with pytest.raises(EmptyCandidates):
        select_replica([], {}, random.Random(0))


def test_select_replica_uniform_ties():
    rng = random.Random(1234)
    n = 10_000
    counts = Counter(select_replica([1, 2, 3], {1: 4, 2: 4, 3: 4}, rng) for _ in range(n))
    for t in (1, 2, 3):
        assert abs(counts[t] / n - 1 / 3) < 0.02
    # and a chi-square check at the 0.1% level (2 dof critical value 13.8)
    chi2 = sum((counts[t] - n / 3) ** 2 / (n / 3) for t in (1, 2, 3))
    assert chi2 < 13.8


def test_single_candidate_draws_nothing():
    a, b = random.Random(3), random.Random(3)
    select_replica([5], {5: 0}, a)
    assert a.random() == b.random()


@given(st.lists(st.integers(0, 3), min_size=1, max_size=30), st.integers(1, 12),
       st.integers(0, 2**32))
@settings(max_examples=300)
def test_tiered_pick_equals_repeated_select(counts, need, seed):
    assigned = dict.fromkeys(range(len(counts)))
    exclude = {0} if len(counts) > 1 else set()
    rng_a, rng_b = random.Random(seed), random.Random(seed)
    got = _pick_replicas(assigned, exclude, counts, need, rng_a)
    want = []
    cands = [t for t in assigned if t not in exclude]
    while cands and len(want) < need:
        t = select_replica(cands, counts, rng_b)
        want.append(t)
        cands.remove(t)
    assert got == want
    assert rng_a.random() == rng_b.random()


def test_mark_complete_idempotent():
    m = new_master(10, 2)
    assign_group(m, 0, random.Random(0))
    assert mark_task_complete(m, 1, 3.0) == [SkipSignal(1, 3.0)]
    assert mark_task_complete(m, 1, 4.0) == []
    with pytest.raises(UnknownTask):
        mark_task_complete(m, 999)
    m.check()


def test_is_done():
    m = new_master(1, 1)
    assert not m.is_done()
    assign_group(m, 0, random.Random(0))
    mark_task_complete(m, 0)
    assert m.is_done()


def test_requeue_goes_to_front_in_order():
    m = new_master(10, 3)
    rng = random.Random(0)
    assign_group(m, 0, rng)
    assign_group(m, 1, rng)   # 3, 4, 5
    m.requeue([4, 3, 99])
    assert list(m.unassigned)[:2] == [4, 3]
    assert 4 not in m.assigned and 3 not in m.assigned
    m.check()


# -- randomized operation sequences ---------------------------------------------------

ops = st.lists(
    st.one_of(
        st.tuples(st.just("assign"), st.integers(0, 5)),
        st.tuples(st.just("complete"), st.integers(0, 24)),
        st.tuples(st.just("requeue"), st.lists(st.integers(0, 24), max_size=4)),
    ),
    max_size=40,
)


def _run_sequence(S, G, seed, seq, allow_requeue):
    m = new_master(S, G)
    rng = random.Random(seed)
    fresh_seen = Counter()
    requeued = Counter()
    for op, arg in seq:
        before = list(m.replica_count)
        if op == "assign":
            assigned_before = list(m.assigned)
            completed_before = set(m.completed)
            g = assign_group(m, arg, rng)
            if not g:
                assert m.is_done()
                continue
            tasks = g.tasks
            assert 1 <= len(tasks) <= G
            assert len(set(tasks)) == len(tasks)
            assert not set(tasks) & completed_before
            if g.replicas:
                assert len(g.fresh) < G
                assert set(g.replicas) <= set(assigned_before) - set(g.fresh)
            if G == 1:
                assert len(tasks) == 1
            fresh_seen.update(g.fresh)
            for t in range(S):
                assert m.replica_count[t] == before[t] + (t in tasks)
        elif op == "complete":
            if arg >= S:
                with pytest.raises(UnknownTask):
                    mark_task_complete(m, arg)
                continue
            if arg not in m.assigned and arg not in m.completed:
                continue   # precondition: handed out at least once
            first = arg not in m.completed
            sig = mark_task_complete(m, arg)
            assert len(sig) == (1 if first else 0)
            assert arg in m.completed
            assert m.replica_count == before
        elif allow_requeue:
            held = [t for t in set(arg) if t < S and t in m.assigned]
            m.requeue([t for t in arg if t < S])
            requeued.update(dict.fromkeys(held, 1))
            assert m.replica_count == before
        m.check()
    # each issuance as fresh is the first one or follows a requeue
    for t, n in fresh_seen.items():
        assert requeued[t] <= n <= requeued[t] + 1
        if not allow_requeue:
            assert n == 1
    assert m.is_done() == (len(m.completed) == S)


@given(st.integers(1, 25), st.integers(1, 6), st.integers(0, 2**31), ops)
@settings(max_examples=6000)
def test_random_sequences_without_departures(S, G, seed, seq):
    _run_sequence(S, G, seed, seq, allow_requeue=False)


@given(st.integers(1, 25), st.integers(1, 6), st.integers(0, 2**31), ops)
@settings(max_examples=4000)
def test_random_sequences_with_requeue(S, G, seed, seq):
    _run_sequence(S, G, seed, seq, allow_requeue=True)


@given(st.lists(st.integers(0, 6), min_size=1, max_size=20), st.integers(0, 2**31))
@settings(max_examples=500)
def test_select_replica_is_minimal(counts, seed):
    cands = list(range(len(counts)))
    t = select_replica(cands, counts, random.Random(seed))
    assert t in cands and counts[t] == min(counts)
