"""Exact offline optima for small instances.

Preemptive feasibility with release dates reduces to a max-flow problem:
source -> job (capacity = processing), job -> interval between consecutive
event points inside the job's window (capacity = interval length), and
interval -> sink (capacity = machines * length).  The job set is feasible
iff the max flow equals the total processing time; with a common release
this coincides with the breakpoint capacity test in :mod:`commitsched.vmin`.

Optima are found by enumerating job subsets in decreasing-volume order and
returning the first feasible one.  A vectorised necessary condition (forced
work per interval pair must fit aggregate capacity) discards most
infeasible subsets before any flow or search runs.
"""

from __future__ import annotations

import math
from collections import deque
from typing import Iterable, Sequence

import numpy as np

from .model import TOL, Instance, Job

#: Subset-enumeration limits; beyond these the oracles report "unavailable".
MAX_PREEMPTIVE_JOBS = 16
MAX_NONPREEMPTIVE_JOBS = 10
MAX_FLOW_JOBS = 24

_FLOW_EPS = 1e-12


class _MaxFlow:
    """Plain breadth-first augmenting max-flow on a dense adjacency matrix."""

    def __init__(self, n: int) -> None:
        self.n = n
        self.cap = [[0.0] * n for _ in range(n)]

    def add(self, u: int, v: int, capacity: float) -> None:
        self.cap[u][v] += capacity

    def max_flow(self, s: int, t: int) -> float:
        total = 0.0
        while True:
            parent = [-1] * self.n
            parent[s] = s
            queue = deque([s])
            while queue and parent[t] == -1:
                u = queue.popleft()
                row = self.cap[u]
                for v in range(self.n):
                    if parent[v] == -1 and row[v] > _FLOW_EPS:
                        parent[v] = u
                        queue.append(v)
            if parent[t] == -1:
                return total
            bottleneck = math.inf
            v = t
            while v != s:
                u = parent[v]
                bottleneck = min(bottleneck, self.cap[u][v])
                v = u
            v = t
            while v != s:
                u = parent[v]
                self.cap[u][v] -= bottleneck
                self.cap[v][u] += bottleneck
                v = u
            total += bottleneck


def _event_points(jobs: Sequence[Job], extra: Iterable[float] = ()) -> list[float]:
    pts = {j.release for j in jobs} | {j.deadline for j in jobs} | set(extra)
    return sorted(pts)


def flow_feasible(jobs: Sequence[Job], m: int) -> bool:
    """Whether the jobs admit a valid preemptive schedule on m machines."""
    jobs = list(jobs)
    if not jobs:
        return True
    if len(jobs) > MAX_FLOW_JOBS:
        raise ValueError(f"flow feasibility limited to {MAX_FLOW_JOBS} jobs")
    for job in jobs:
        if job.deadline - job.release < job.processing - TOL:
            return False
    points = _event_points(jobs)
    intervals = [(a, b) for a, b in zip(points, points[1:]) if b - a > TOL]
    n = len(jobs)
    k = len(intervals)
    net = _MaxFlow(2 + n + k)
    source, sink = 0, 1 + n + k
    total = 0.0
    for ji, job in enumerate(jobs):
        net.add(source, 1 + ji, job.processing)
        total += job.processing
        for ii, (a, b) in enumerate(intervals):
            if a >= job.release - TOL and b <= job.deadline + TOL:
                net.add(1 + ji, 1 + n + ii, b - a)
    for ii, (a, b) in enumerate(intervals):
        net.add(1 + n + ii, sink, m * (b - a))
    flow = net.max_flow(source, sink)
    return flow >= total - 1e-9 * max(1.0, total)


def max_prefix_work(jobs: Sequence[Job], m: int, cut: float) -> float:
    """Largest volume any valid schedule of *all* jobs can place in [0, cut).

    Requires the full set to be feasible.  Solved as a min-cost max-flow:
    interval arcs after the cut cost one per unit, so the minimum-cost
    saturating flow defers the least possible work past the cut.
    """
    jobs = list(jobs)
    if not jobs or cut <= min(j.release for j in jobs):
        return 0.0
    points = _event_points(jobs, extra=[cut])
    intervals = [(a, b) for a, b in zip(points, points[1:]) if b - a > TOL]
    n, k = len(jobs), len(intervals)
    size = 2 + n + k
    source, sink = 0, 1 + n + k
    cap = [[0.0] * size for _ in range(size)]
    cost = [[0.0] * size for _ in range(size)]
    total = 0.0
    for ji, job in enumerate(jobs):
        cap[source][1 + ji] = job.processing
        total += job.processing
        for ii, (a, b) in enumerate(intervals):
            if a >= job.release - TOL and b <= job.deadline + TOL:
                cap[1 + ji][1 + n + ii] = b - a
    for ii, (a, b) in enumerate(intervals):
        cap[1 + n + ii][sink] = m * (b - a)
        if a >= cut - TOL:
            late = 1.0
            cost[1 + n + ii][sink] = late
            cost[sink][1 + n + ii] = -late
    flowed = 0.0
    late_work = 0.0
    while True:
        # Bellman-Ford shortest path in cost over residual capacity.
        dist = [math.inf] * size
        parent = [-1] * size
        dist[source] = 0.0
        for _ in range(size):
            changed = False
            for u in range(size):
                if dist[u] is math.inf:
                    continue
                for v in range(size):
                    if cap[u][v] > _FLOW_EPS and dist[u] + cost[u][v] < dist[v] - 1e-15:
                        dist[v] = dist[u] + cost[u][v]
                        parent[v] = u
                        changed = True
            if not changed:
                break
        if parent[sink] == -1:
            break
        bottleneck = math.inf
        v = sink
        while v != source:
            u = parent[v]
            bottleneck = min(bottleneck, cap[u][v])
            v = u
        v = sink
        while v != source:
            u = parent[v]
            cap[u][v] -= bottleneck
            cap[v][u] += bottleneck
            v = u
        flowed += bottleneck
        late_work += bottleneck * dist[sink]
    if flowed < total - 1e-6 * max(1.0, total):
        raise ValueError("job set is infeasible; prefix-work oracle needs a feasible set")
    return total - late_work


def _forced_work_table(jobs: Sequence[Job]) -> tuple[np.ndarray, np.ndarray]:
    """Per-job forced work inside every event-point interval pair.

    ``F[j, q]`` is a lower bound on the work of job j that any schedule
    must place inside the q-th interval [x, y); ``cap_unit[q] = y - x``.
    Used only as a necessary condition to prune infeasible subsets.
    """
    points = _event_points(jobs)
    pairs = [(x, y) for i, x in enumerate(points) for y in points[i + 1 :]]
    if not pairs:
        return np.zeros((len(jobs), 0)), np.zeros(0)
    xs = np.array([x for x, _ in pairs])
    ys = np.array([y for _, y in pairs])
    F = np.zeros((len(jobs), len(pairs)))
    for ji, job in enumerate(jobs):
        before = np.maximum(0.0, np.minimum(xs, job.deadline) - job.release)
        after = np.maximum(0.0, job.deadline - np.maximum(ys, job.release))
        F[ji] = np.maximum(0.0, job.processing - before - after)
    return F, ys - xs


def _descending_subsets(processing: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    n = len(processing)
    vols = np.zeros(1 << n)
    for j in range(n):
        bit = 1 << j
        vols[bit : bit << 1] = vols[: bit] + processing[j]
    order = np.argsort(-vols, kind="stable")
    return order, vols


def opt_preemptive(instance: Instance) -> float | None:
    """Exact preemptive optimum by subset enumeration, or None when the
    instance exceeds the enumeration limit."""
    jobs = list(instance.jobs)
    if len(jobs) > MAX_PREEMPTIVE_JOBS:
        return None
    if not jobs:
        return 0.0
    m = instance.machines
    order, vols = _descending_subsets([j.processing for j in jobs])
    F, widths = _forced_work_table(jobs)
    caps = m * widths
    for mask in order:
        mask = int(mask)
        members = [ji for ji in range(len(jobs)) if mask >> ji & 1]
        if members:
            demand = F[members].sum(axis=0)
            if np.any(demand > caps + 1e-9):
                continue
        if flow_feasible([jobs[ji] for ji in members], m):
            return float(vols[mask])
    return 0.0


def _np_search(jobs: Sequence[Job], m: int) -> bool:
    """Depth-first feasibility for a fixed job set without preemption.

    Branches on which job starts next and on which distinct machine load it
    lands; identical machines and identical jobs are collapsed, dead states
    are memoised on (remaining set, rounded machine free times).
    """
    n = len(jobs)
    order = sorted(range(n), key=lambda ji: (jobs[ji].deadline, jobs[ji].release, ji))
    failed: set[tuple[int, tuple[int, ...]]] = set()

    def key(mask: int, free: tuple[float, ...]) -> tuple[int, tuple[int, ...]]:
        return mask, tuple(int(round(f / TOL)) for f in free)

    def rec(mask: int, free: tuple[float, ...]) -> bool:
        if mask == 0:
            return True
        k = key(mask, free)
        if k in failed:
            return False
        min_free = free[0]
        # Dead-state prune: some job can no longer meet its deadline anywhere.
        for ji in order:
            if mask >> ji & 1:
                job = jobs[ji]
                if max(job.release, min_free) + job.processing > job.deadline + TOL:
                    failed.add(k)
                    return False
        seen_jobs: set[tuple[float, float, float]] = set()
        for ji in order:
            if not (mask >> ji & 1):
                continue
            job = jobs[ji]
            sig = (job.release, job.processing, job.deadline)
            if sig in seen_jobs:
                continue
            seen_jobs.add(sig)
            seen_loads: set[float] = set()
            for slot, f_time in enumerate(free):
                if f_time in seen_loads:
                    continue
                seen_loads.add(f_time)
                start = max(job.release, f_time)
                if start + job.processing > job.deadline + TOL:
                    break  # free times sorted ascending; later slots only worse
                nxt = tuple(sorted(free[:slot] + (start + job.processing,) + free[slot + 1 :]))
                if rec(mask & ~(1 << ji), nxt):
                    return True
        failed.add(k)
        return False

    return rec((1 << n) - 1, tuple([0.0] * m))


def opt_nonpreemptive(instance: Instance) -> float | None:
    """Exact non-preemptive optimum by subset enumeration, or None when the
    instance exceeds the enumeration limit."""
    jobs = list(instance.jobs)
    if len(jobs) > MAX_NONPREEMPTIVE_JOBS:
        return None
    if not jobs:
        return 0.0
    m = instance.machines
    order, vols = _descending_subsets([j.processing for j in jobs])
    F, widths = _forced_work_table(jobs)
    caps = m * widths
    # Preemption relaxes the problem, so nothing above the preemptive
    # optimum can be feasible here; start below it.
    relaxed = opt_preemptive(instance)
    for mask in order:
        mask = int(mask)
        if relaxed is not None and vols[mask] > relaxed + 1e-9:
            continue
        members = [ji for ji in range(len(jobs)) if mask >> ji & 1]
        if members:
            demand = F[members].sum(axis=0)
            if np.any(demand > caps + 1e-9):
                continue
        subset = [jobs[ji] for ji in members]
        if not flow_feasible(subset, m):
            continue
        if _np_search(subset, m):
            return float(vols[mask])
    return 0.0
