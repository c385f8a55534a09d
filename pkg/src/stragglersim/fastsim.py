"""Compiled twin of :mod:`stragglersim.sim_engine` for Monte-Carlo sweeps.

Same event semantics and tie-breaking as the reference engine, but it keeps
no trace and returns only the summary numbers.  Random streams are CPython's
Mersenne Twister reimplemented here and seeded exactly like ``random.Random``,
so for equal configs this kernel and the reference engine draw the same
numbers and produce the same makespan bit-for-bit.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np
from numba import njit

from . import rng as rngmod
from .sim_engine import Policy, SimConfig
from .straggler_model import Deterministic, MixtureModel, ShiftedExp

_MASK32 = 0xFFFFFFFF
_INF = math.inf

# --------------------------------------------------------------------------
# MT19937, bit-compatible with CPython's random module


def seed_key(value: int) -> np.ndarray:
    """32-bit little-endian words of ``abs(value)``, as ``random.seed`` uses."""
    n = abs(int(value))
    words = []
    while n:
        words.append(n & _MASK32)
        n >>= 32
    return np.array(words or [0], dtype=np.int64)


@njit(cache=True)
def _mt_seed(st, key):
    st[0] = 19650218
    for i in range(1, 624):
        prev = st[i - 1]
        st[i] = (1812433253 * (prev ^ (prev >> 30)) + i) & 0xFFFFFFFF
    i = 1
    j = 0
    klen = key.shape[0]
    k = 624 if 624 > klen else klen
    while k > 0:
        prev = st[i - 1]
        st[i] = ((st[i] ^ ((prev ^ (prev >> 30)) * 1664525)) + key[j] + j) & 0xFFFFFFFF
        i += 1
        j += 1
        if i >= 624:
            st[0] = st[623]
            i = 1
        if j >= klen:
            j = 0
        k -= 1
    k = 623
    while k > 0:
        prev = st[i - 1]
        st[i] = ((st[i] ^ ((prev ^ (prev >> 30)) * 1566083941)) - i) & 0xFFFFFFFF
        i += 1
        if i >= 624:
            st[0] = st[623]
            i = 1
        k -= 1
    st[0] = 0x80000000
    st[624] = 624


@njit(cache=True)
def _u32(st):
    idx = st[624]
    if idx >= 624:
        for kk in range(624 - 397):
            y = (st[kk] & 0x80000000) | (st[kk + 1] & 0x7FFFFFFF)
            st[kk] = st[kk + 397] ^ (y >> 1) ^ (0x9908B0DF if (y & 1) else 0)
        for kk in range(624 - 397, 623):
            y = (st[kk] & 0x80000000) | (st[kk + 1] & 0x7FFFFFFF)
            st[kk] = st[kk - 227] ^ (y >> 1) ^ (0x9908B0DF if (y & 1) else 0)
        y = (st[623] & 0x80000000) | (st[0] & 0x7FFFFFFF)
        st[623] = st[396] ^ (y >> 1) ^ (0x9908B0DF if (y & 1) else 0)
        idx = 0
    y = st[idx]
    st[624] = idx + 1
    y ^= y >> 11
    y ^= (y << 7) & 0x9D2C5680
    y ^= (y << 15) & 0xEFC60000
    y ^= y >> 18
    return y


@njit(cache=True)
def _random(st):
    a = _u32(st) >> 5
    b = _u32(st) >> 6
    return (a * 67108864.0 + b) * (1.0 / 9007199254740992.0)


@njit(cache=True)
def _randbelow(st, n):
    if n == 0:
        return 0
    k = 0
    m = n
    while m:
        k += 1
        m >>= 1
    r = _u32(st) >> (32 - k)
    while r >= n:
        r = _u32(st) >> (32 - k)
    return r


def make_stream(seed: int, purpose: int, index: int = 0) -> np.ndarray:
    """State array matching ``rng.stream(seed, purpose, index)``."""
    base = (seed & ((1 << 64) - 1)) ^ purpose
    st = np.zeros(625, dtype=np.int64)
    _mt_seed(st, seed_key(base + (index << 64)))
    return st


@njit(cache=True)
def _draw_u32(st, n):
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        out[i] = _u32(st)
    return out


# --------------------------------------------------------------------------
# Kernel

_NONE = -1
_COMPLETION, _DEPARTURE, _JOIN, _ASSIGNMENT = 0, 1, 2, 3
_PENDING, _CURRENT, _LOCAL, _GONE = 0, 1, 2, 3


@njit(cache=True)
def _sample(st, kind, cum, rates, shifts, value):
    if kind == 0:
        return value
    if kind == 1:
        return shifts[0] - math.log(1.0 - _random(st)) / rates[0]
    u = _random(st)
    c = cum.shape[0] - 1
    for i in range(cum.shape[0]):
        if u < cum[i]:
            c = i
            break
    return shifts[c] - math.log(1.0 - _random(st)) / rates[c]


@njit(cache=True)
def _simulate(W, S, G, H, report_each, preempt, kind, cum, rates, shifts, value,
              elastic, rate_a, rate_u, streams):
    st_time = streams[0]
    st_pick = streams[1]
    st_shuf = streams[2]

    # master: unassigned ring buffer, assigned doubly linked list (sentinel S)
    lu = np.empty(S, dtype=np.int64)
    for i in range(S):
        lu[i] = i
    lu_head = 0
    lu_len = S
    la_next = np.empty(S + 1, dtype=np.int64)
    la_prev = np.empty(S + 1, dtype=np.int64)
    la_next[S] = S
    la_prev[S] = S
    in_la = np.zeros(S, dtype=np.bool_)
    la_size = 0
    completed = np.zeros(S, dtype=np.bool_)
    counts = np.zeros(S, dtype=np.int64)
    holds = np.zeros((S, W), dtype=np.bool_)
    hold_n = np.zeros(S, dtype=np.int64)
    accepted = 0

    # workers
    gtask = np.full((W, G), -1, dtype=np.int64)
    gstate = np.full((W, G), _GONE, dtype=np.int64)
    lstart = np.zeros((W, G))
    lend = np.zeros((W, G))
    glen = np.zeros(W, dtype=np.int64)
    cur = np.full(W, -1, dtype=np.int64)
    nlocal = np.zeros(W, dtype=np.int64)
    xw = np.zeros(W)
    wstart = np.zeros(W)
    oh_end = np.zeros(W)
    busy = np.zeros(W, dtype=np.bool_)
    avail = np.ones(W, dtype=np.bool_)
    gid = np.full(W, -1, dtype=np.int64)
    work_t = np.zeros(W)
    work_k = np.full(W, _ASSIGNMENT, dtype=np.int64)
    av_t = np.zeros(W)
    av_k = np.full(W, _NONE, dtype=np.int64)
    tu = np.zeros(W)

    # groups: issue time and (possibly truncated) overhead end
    cap = S + W + 16
    g_issued = np.empty(cap)
    g_ohend = np.empty(cap)
    ngroups = 0

    # grouping-only reports waiting to be processed (FIFO of workers)
    rq = np.empty(W + 1, dtype=np.int64)
    rq_head = 0
    rq_len = 0
    # snapshot of each queued report: slots that were local-done at group end
    rep_tasks = np.full((W, G), -1, dtype=np.int64)
    rep_s = np.zeros((W, G))
    rep_e = np.zeros((W, G))
    rep_n = np.zeros(W, dtype=np.int64)

    # wasted intervals, clipped at the makespan once it is known
    wbuf = np.empty((4 * W * G + 64, 2))
    wn = np.zeros(1, dtype=np.int64)
    useful = 0.0
    makespan = -1.0
    last_end = 0.0
    cand = np.empty(S, dtype=np.int64)
    ccount = np.empty(S, dtype=np.int64)
    reps = np.empty(G, dtype=np.int64)

    if elastic:
        for w in range(W):
            st = streams[3 + w]
            ta = -math.log(1.0 - _random(st)) / rate_a
            tu[w] = -math.log(1.0 - _random(st)) / rate_u
            av_t[w] = ta
            av_k[w] = _DEPARTURE

    status = 0
    while makespan < 0.0:
        # one event plus the final sweep add at most 2 * W * G intervals
        if wn[0] + 2 * W * G + 2 > wbuf.shape[0]:
            grown = np.empty((2 * wbuf.shape[0], 2))
            grown[:wn[0]] = wbuf[:wn[0]]
            wbuf = grown
        # pick the next event: (time, kind, worker)
        bw = -1
        bt = _INF
        bk = 99
        for w in range(W):
            k = work_k[w]
            if k >= 0:
                t = work_t[w]
                if t < bt or (t == bt and k < bk):
                    bt = t
                    bk = k
                    bw = w
            k = av_k[w]
            if k >= 0:
                t = av_t[w]
                if t < bt or (t == bt and k < bk):
                    bt = t
                    bk = k
                    bw = w
        if bw < 0:
            status = 1
            break
        now = bt
        w = bw

        if bk == _ASSIGNMENT:
            work_k[w] = _NONE
            if lu_len == 0 and la_size == 0:
                continue
            # fresh tasks from the head of the unassigned list
            n = 0
            while lu_len > 0 and n < G:
                t = lu[lu_head]
                lu_head += 1
                if lu_head == S:
                    lu_head = 0
                lu_len -= 1
                gtask[w, n] = t
                n += 1
                p = la_prev[S]
                la_next[p] = t
                la_prev[t] = p
                la_next[t] = S
                la_prev[S] = t
                in_la[t] = True
                la_size += 1
            nfresh = n
            need = G - nfresh
            nrep = 0
            if need > 0 and la_size > nfresh:
                # candidates in assigned order, excluding this group's fresh tasks
                nc = 0
                t = la_next[S]
                while t != S:
                    fresh = False
                    for q in range(nfresh):
                        if gtask[w, q] == t:
                            fresh = True
                            break
                    if not fresh:
                        cand[nc] = t
                        ccount[nc] = counts[t]
                        nc += 1
                    t = la_next[t]
                # ascending count tiers, each in assigned order
                while nrep < need and nc > 0:
                    lo = ccount[0]
                    for q in range(1, nc):
                        if ccount[q] < lo:
                            lo = ccount[q]
                    # compact the lowest tier to the front, preserving order
                    tier_n = 0
                    for q in range(nc):
                        if ccount[q] == lo:
                            tier_n += 1
                    tier = np.empty(tier_n, dtype=np.int64)
                    rest = 0
                    ti = 0
                    for q in range(nc):
                        if ccount[q] == lo:
                            tier[ti] = cand[q]
                            ti += 1
                        else:
                            cand[rest] = cand[q]
                            ccount[rest] = ccount[q]
                            rest += 1
                    nc = rest
                    tl = tier_n
                    while tl > 0 and nrep < need:
                        if tl == 1:
                            idx = 0
                        else:
                            idx = _randbelow(st_pick, tl)
                        reps[nrep] = tier[idx]
                        nrep += 1
                        for q in range(idx, tl - 1):
                            tier[q] = tier[q + 1]
                        tl -= 1
                if nrep > 1:
                    i = nrep - 1
                    while i >= 1:
                        j = _randbelow(st_shuf, i + 1)
                        tmp = reps[i]
                        reps[i] = reps[j]
                        reps[j] = tmp
                        i -= 1
                for q in range(nrep):
                    gtask[w, nfresh + q] = reps[q]
            L = nfresh + nrep
            for q in range(L):
                t = gtask[w, q]
                counts[t] += 1
                gstate[w, q] = _PENDING
                holds[t, w] = True
                hold_n[t] += 1
            for q in range(L, G):
                gstate[w, q] = _GONE
            glen[w] = L
            nlocal[w] = 0
            if ngroups == cap:
                cap2 = cap * 2
                a1 = np.empty(cap2)
                a2 = np.empty(cap2)
                a1[:cap] = g_issued
                a2[:cap] = g_ohend
                g_issued = a1
                g_ohend = a2
                cap = cap2
            g_issued[ngroups] = now
            g_ohend[ngroups] = now + H
            gid[w] = ngroups
            ngroups += 1
            busy[w] = True
            xw[w] = _sample(st_time, kind, cum, rates, shifts, value)
            oh_end[w] = now + H
            wstart[w] = now + H
            cur[w] = 0
            gstate[w, 0] = _CURRENT
            work_t[w] = wstart[w] + xw[w]
            work_k[w] = _COMPLETION
            continue

        if bk == _COMPLETION:
            work_k[w] = _NONE
            c = cur[w]
            task = gtask[w, c]
            if report_each:
                gstate[w, c] = _GONE
                # accept (always new: stale copies were preempted)
                if not completed[task]:
                    completed[task] = True
                    if in_la[task]:
                        in_la[task] = False
                        la_next[la_prev[task]] = la_next[task]
                        la_prev[la_next[task]] = la_prev[task]
                        la_size -= 1
                    useful += now - wstart[w]
                    accepted += 1
                    if now > last_end:
                        last_end = now
                    for h in range(W):
                        if holds[task, h]:
                            holds[task, h] = False
                            if h != w:
                                # skip / preempt on worker h
                                rq_len = _skip(h, task, now, gtask, gstate, glen, cur,
                                                       wstart, oh_end, xw, busy, work_t, work_k,
                                                       lstart, lend, nlocal, rq, rq_head,
                                                       rq_len, rep_tasks, rep_s, rep_e, rep_n,
                                                       wbuf, wn, preempt, W)
                    hold_n[task] = 0
                    if accepted == S:
                        makespan = last_end
                else:
                    _waste(wbuf, wn, wstart[w], now)
                    if holds[task, w]:
                        holds[task, w] = False
                        hold_n[task] -= 1
            else:
                gstate[w, c] = _LOCAL
                lstart[w, c] = wstart[w]
                lend[w, c] = now
                nlocal[w] += 1
            rq_len = _advance(w, now, gtask, gstate, glen, cur, wstart, oh_end, xw, busy,
                              work_t, work_k, lstart, lend, nlocal, rq, rq_head, rq_len,
                              rep_tasks, rep_s, rep_e, rep_n, W)
            # drain grouping-only reports
            while rq_len > 0:
                r = rq[rq_head]
                rq_head += 1
                if rq_head == W + 1:
                    rq_head = 0
                rq_len -= 1
                for q in range(rep_n[r]):
                    task = rep_tasks[r, q]
                    if not completed[task]:
                        completed[task] = True
                        if in_la[task]:
                            in_la[task] = False
                            la_next[la_prev[task]] = la_next[task]
                            la_prev[la_next[task]] = la_prev[task]
                            la_size -= 1
                        useful += rep_e[r, q] - rep_s[r, q]
                        accepted += 1
                        if rep_e[r, q] > last_end:
                            last_end = rep_e[r, q]
                        for h in range(W):
                            if holds[task, h]:
                                holds[task, h] = False
                                if h != r:
                                    rq_len = _skip(h, task, now, gtask, gstate, glen, cur,
                                                           wstart, oh_end, xw, busy, work_t,
                                                           work_k, lstart, lend, nlocal, rq,
                                                           rq_head, rq_len, rep_tasks, rep_s,
                                                           rep_e, rep_n, wbuf, wn, preempt, W)
                        hold_n[task] = 0
                        if accepted == S:
                            makespan = last_end
                    else:
                        _waste(wbuf, wn, rep_s[r, q], rep_e[r, q])
                        if holds[task, r]:
                            holds[task, r] = False
                            hold_n[task] -= 1
                rep_n[r] = 0
            continue

        if bk == _DEPARTURE:
            av_k[w] = _NONE
            g = gid[w]
            if g >= 0 and now < g_ohend[g]:
                g_ohend[g] = now
            if busy[w]:
                nback = 0
                for q in range(glen[w]):
                    s_ = gstate[w, q]
                    if s_ == _LOCAL:
                        _waste(wbuf, wn, lstart[w, q], lend[w, q])
                for q in range(glen[w]):
                    if gstate[w, q] == _CURRENT and now > wstart[w]:
                        _waste(wbuf, wn, wstart[w], now)
                for q in range(glen[w]):
                    s_ = gstate[w, q]
                    if s_ == _PENDING or s_ == _CURRENT or s_ == _LOCAL:
                        t = gtask[w, q]
                        if holds[t, w]:
                            holds[t, w] = False
                            hold_n[t] -= 1
                        if hold_n[t] == 0 and not completed[t]:
                            reps[nback] = t
                            nback += 1
                        gstate[w, q] = _GONE
                # requeue at the front of the unassigned list, keeping order
                for q in range(nback - 1, -1, -1):
                    t = reps[q]
                    if in_la[t]:
                        in_la[t] = False
                        la_next[la_prev[t]] = la_next[t]
                        la_prev[la_next[t]] = la_prev[t]
                        la_size -= 1
                        lu_head -= 1
                        if lu_head < 0:
                            lu_head = S - 1
                        lu[lu_head] = t
                        lu_len += 1
                busy[w] = False
                nlocal[w] = 0
                cur[w] = -1
            avail[w] = False
            work_k[w] = _NONE
            av_t[w] = now + tu[w]
            av_k[w] = _JOIN
            continue

        # join
        avail[w] = True
        st = streams[3 + w]
        ta = -math.log(1.0 - _random(st)) / rate_a
        tu[w] = -math.log(1.0 - _random(st)) / rate_u
        work_t[w] = now
        work_k[w] = _ASSIGNMENT
        av_t[w] = now + ta
        av_k[w] = _DEPARTURE

    if status != 0:
        return -1.0, 0.0, 0.0, 0.0, ngroups, status

    # unreported local results at the end are discarded
    for w in range(W):
        if busy[w]:
            for q in range(glen[w]):
                if gstate[w, q] == _LOCAL:
                    _waste(wbuf, wn, lstart[w, q], lend[w, q])
    wasted = 0.0
    for i in range(wn[0]):
        a = wbuf[i, 0] if wbuf[i, 0] < makespan else makespan
        b = wbuf[i, 1] if wbuf[i, 1] < makespan else makespan
        wasted += b - a
    overhead = 0.0
    for g in range(ngroups):
        e = g_ohend[g]
        if e > makespan:
            e = makespan
        a = g_issued[g] if g_issued[g] < makespan else makespan
        overhead += e - a
    return makespan, wasted, useful, overhead, ngroups, 0


@njit(cache=True)
def _waste(wbuf, wn, start, end):
    wbuf[wn[0], 0] = start
    wbuf[wn[0], 1] = end
    wn[0] += 1


@njit(cache=True)
def _skip(h, task, now, gtask, gstate, glen, cur, wstart, oh_end, xw, busy, work_t, work_k,
          lstart, lend, nlocal, rq, rq_head, rq_len, rep_tasks, rep_s, rep_e, rep_n, wbuf, wn,
          preempt, W):
    if not busy[h]:
        return rq_len
    for q in range(glen[h]):
        if gtask[h, q] == task:
            s_ = gstate[h, q]
            if s_ == _CURRENT:
                if now > wstart[h] and not preempt:
                    break
                if now > wstart[h]:
                    _waste(wbuf, wn, wstart[h], now)
                gstate[h, q] = _GONE
                work_k[h] = _NONE
                rq_len = _advance(h, now, gtask, gstate, glen, cur, wstart, oh_end, xw, busy,
                                  work_t, work_k, lstart, lend, nlocal, rq, rq_head, rq_len,
                                  rep_tasks, rep_s, rep_e, rep_n, W)
            elif s_ == _PENDING:
                gstate[h, q] = _GONE
            break
    return rq_len


@njit(cache=True)
def _advance(w, now, gtask, gstate, glen, cur, wstart, oh_end, xw, busy, work_t, work_k,
             lstart, lend, nlocal, rq, rq_head, rq_len, rep_tasks, rep_s, rep_e, rep_n, W):
    nxt = -1
    for q in range(cur[w] + 1, glen[w]):
        if gstate[w, q] == _PENDING:
            nxt = q
            break
    if nxt >= 0:
        cur[w] = nxt
        gstate[w, nxt] = _CURRENT
        wstart[w] = now if now > oh_end[w] else oh_end[w]
        work_t[w] = wstart[w] + xw[w]
        work_k[w] = _COMPLETION
        return rq_len
    end = now if now > oh_end[w] else oh_end[w]
    busy[w] = False
    cur[w] = glen[w]
    if nlocal[w] > 0:
        n = 0
        for q in range(glen[w]):
            if gstate[w, q] == _LOCAL:
                rep_tasks[w, n] = gtask[w, q]
                rep_s[w, n] = lstart[w, q]
                rep_e[w, n] = lend[w, q]
                n += 1
                gstate[w, q] = _GONE
        rep_n[w] = n
        nlocal[w] = 0
        pos = rq_head + rq_len
        if pos >= W + 1:
            pos -= W + 1
        rq[pos] = w
        rq_len += 1
    work_t[w] = end
    work_k[w] = _ASSIGNMENT
    return rq_len


# --------------------------------------------------------------------------
# Python entry point


class FastResult(NamedTuple):
    makespan: float
    wasted_time: float
    useful_time: float
    overhead_time: float
    groups: int


def _dist_arrays(dist):
    if isinstance(dist, Deterministic):
        return 0, np.zeros(1), np.ones(1), np.zeros(1), float(dist.value)
    if isinstance(dist, ShiftedExp):
        return 1, np.ones(1), np.array([dist.rate]), np.array([dist.shift]), 0.0
    if isinstance(dist, MixtureModel):
        return (2, np.array(dist._cumulative), np.array([d.rate for _, d in dist.components]),
                np.array([d.shift for _, d in dist.components]), 0.0)
    raise TypeError(f"unsupported distribution {dist!r}")


def simulate_fast(config: SimConfig) -> FastResult:
    """Summary of ``run(config)`` without building a trace."""
    config.validate()
    W = config.num_workers
    G = config.effective_group_size
    kind, cum, rates, shifts, value = _dist_arrays(config.task_time)
    el = config.elasticity
    purposes = [(rngmod.TASK_TIME, 0), (rngmod.REPLICA_PICK, 0), (rngmod.REPLICA_SHUFFLE, 0)]
    if el is not None:
        purposes += [(rngmod.AVAILABILITY, w) for w in range(W)]
    streams = np.stack([make_stream(config.seed, p, i) for p, i in purposes])
    makespan, wasted, useful, overhead, ngroups, status = _simulate(
        W, config.num_tasks, G, float(config.overhead),
        config.policy is not Policy.GROUPING_ONLY,
        config.policy is not Policy.GROUPING_ONLY or config.preempt_in_flight,
        kind, cum, rates, shifts, value,
        el is not None, el.rate_available if el else 1.0, el.rate_unavailable if el else 1.0,
        streams)
    if status != 0:
        raise RuntimeError("simulation stalled with work remaining")
    return FastResult(makespan, wasted, useful, overhead, int(ngroups))
