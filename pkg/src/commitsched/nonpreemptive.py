"""Non-preemptive online allocation with machine and start-time commitment.

A job accepted at its release is bound immediately to one machine and
starts as soon as that machine's outstanding load drains, so only the
per-machine loads matter.  Admission compares the job's deadline against
the load threshold ``d_lim``: the maximum over machines, ranked by
decreasing load, of ``load * ((1+eps)/eps)^(rank/m) + t``.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import IO, Iterable

from .model import (
    TOL,
    DecisionLog,
    DecisionRecord,
    Instance,
    Job,
    validate_instance,
)


class CommitmentError(RuntimeError):
    """A committed start would miss its deadline; the policy forbids this."""


@dataclass(frozen=True)
class CommittedStart:
    """The irrevocable placement handed out at acceptance time."""

    job: int
    machine: int
    start: float


@dataclass
class NonpreemptiveResult:
    decisions: DecisionLog
    starts: list[CommittedStart]
    accepted_volume: float


def d_lim(loads: Iterable[float], t: float, m: int, epsilon: float) -> float:
    """Load threshold: max over load ranks of load * rho^(rank/m) + t.

    Ranks are 1-based over loads sorted in nonincreasing order; zero loads
    contribute exactly t.
    """
    rho = (1.0 + epsilon) / epsilon
    ranked = sorted(loads, reverse=True)
    if len(ranked) != m:
        raise ValueError(f"expected {m} loads, got {len(ranked)}")
    best = t
    for i, load in enumerate(ranked, start=1):
        best = max(best, load * rho ** (i / m) + t)
    return best


class NonpreemptiveSimulator:
    """Threshold-based online allocation on ``machines`` identical machines."""

    def __init__(self, machines: int, epsilon: float, trace: IO[str] | None = None) -> None:
        self.machines = machines
        self.epsilon = epsilon
        self.trace = trace
        self.clock = 0.0
        self.loads = [0.0] * machines  # outstanding work per stable machine id
        self.decisions = DecisionLog()
        self.starts: list[CommittedStart] = []
        self._jobs: dict[int, Job] = {}

    def advance_to(self, t: float) -> None:
        """Decay every load by the elapsed time, floored at zero."""
        if t < self.clock - TOL:
            raise ValueError(f"time moves backwards: {self.clock} -> {t}")
        dt = max(0.0, t - self.clock)
        self.loads = [max(0.0, load - dt) for load in self.loads]
        self.clock = max(self.clock, t)
        self._check_load_sum()

    def threshold(self) -> float:
        return d_lim(self.loads, self.clock, self.machines, self.epsilon)

    def submit(self, job: Job) -> CommittedStart | None:
        self.advance_to(job.release)
        return self.on_arrival(job)

    def on_arrival(self, job: Job) -> CommittedStart | None:
        if abs(job.release - self.clock) > TOL:
            raise RuntimeError(
                f"arrival handled at clock {self.clock} != release {job.release}; advance first"
            )
        limit = self.threshold()
        if job.deadline < limit - TOL:
            self.decisions.add(DecisionRecord(job.id, False, self.clock, limit))
            self._check_usable_interval(job)
            self._trace(job, limit, None)
            return None
        # Try every placement; keep the one minimising the post-acceptance
        # threshold, breaking ties by smaller pre-load then machine id.
        best: tuple[float, float, int] | None = None
        for i in range(self.machines):
            trial = list(self.loads)
            trial[i] += job.processing
            cand = d_lim(trial, self.clock, self.machines, self.epsilon)
            key = (cand, self.loads[i], i)
            if best is None or key < best:
                best = key
        assert best is not None
        _, pre_load, machine = best
        start = self.clock + pre_load
        if start + job.processing > job.deadline + TOL:
            raise CommitmentError(
                f"job {job.id} placed at {start} would finish {start + job.processing} "
                f"past deadline {job.deadline}"
            )
        self.loads[machine] += job.processing
        self._jobs[job.id] = job
        committed = CommittedStart(job.id, machine, start)
        self.starts.append(committed)
        self.decisions.add(DecisionRecord(job.id, True, self.clock, limit))
        self._check_load_sum()
        self._trace(job, limit, committed)
        return committed

    def accepted_volume(self) -> float:
        return sum(self._jobs[j].processing for j in self.decisions.accepted_ids())

    # -- invariants -------------------------------------------------------

    def _check_load_sum(self) -> None:
        # The two largest loads always cover the threshold scaled back by
        # rho^(-1/m); for m=1 the second load reads as zero.
        rho = (1.0 + self.epsilon) / self.epsilon
        ranked = sorted(self.loads, reverse=True)
        top_two = ranked[0] + (ranked[1] if len(ranked) > 1 else 0.0)
        need = (self.threshold() - self.clock) * rho ** (-1.0 / self.machines)
        if top_two < need - 1e-7:
            raise RuntimeError(
                f"load-sum invariant violated at t={self.clock}: {top_two} < {need}"
            )

    def _check_usable_interval(self, job: Job) -> None:
        rho = (1.0 + self.epsilon) / self.epsilon
        ranked = sorted(self.loads, reverse=True)
        top_two = ranked[0] + (ranked[1] if len(ranked) > 1 else 0.0)
        if job.deadline - job.release > top_two * rho ** (1.0 / self.machines) + 1e-7:
            raise RuntimeError(
                f"rejected job {job.id} has window {job.deadline - job.release} beyond "
                f"the usable bound {top_two * rho ** (1.0 / self.machines)}"
            )

    def _trace(self, job: Job, limit: float, committed: CommittedStart | None) -> None:
        if self.trace is None:
            return
        if committed is None:
            self.trace.write(f"{self.clock:.9g} job={job.id} d_lim={limit:.9g} reject\n")
        else:
            self.trace.write(
                f"{self.clock:.9g} job={job.id} d_lim={limit:.9g} accept "
                f"machine={committed.machine} start={committed.start:.9g}\n"
            )


def _validated(instance: Instance) -> None:
    problems = validate_instance(instance)
    if problems:
        raise ValueError("invalid instance: " + "; ".join(str(v) for v in problems))


def simulate_nonpreemptive(instance: Instance, trace: IO[str] | None = None) -> NonpreemptiveResult:
    """Run the threshold policy over a full instance."""
    _validated(instance)
    sim = NonpreemptiveSimulator(instance.machines, instance.epsilon, trace=trace)
    for job in instance.jobs:
        sim.submit(job)
    return NonpreemptiveResult(sim.decisions, sim.starts, sim.accepted_volume())


def partition_group_size(epsilon: float) -> int:
    """Group size for the partitioned variant: round(ln((1+eps)/eps)), >= 1."""
    return max(1, round(math.log((1.0 + epsilon) / epsilon)))


def simulate_partitioned(instance: Instance, trace: IO[str] | None = None) -> NonpreemptiveResult:
    """Partition the machines into near-log-sized groups and cascade offers.

    Every job is offered to the first group's allocator; a rejection there
    passes the job to the next group, and so on.  Remainder machines (when
    the group size does not divide m) form a final smaller group.
    """
    _validated(instance)
    g = partition_group_size(instance.epsilon)
    m = instance.machines
    if m < g:
        raise ValueError(f"need at least {g} machines for the partitioned variant, got {m}")
    sizes = [g] * (m // g)
    if m % g:
        sizes.append(m % g)
    sims = [NonpreemptiveSimulator(size, instance.epsilon) for size in sizes]
    bases = [sum(sizes[:i]) for i in range(len(sizes))]
    decisions = DecisionLog()
    starts: list[CommittedStart] = []
    volume = 0.0
    for job in instance.jobs:
        placed: CommittedStart | None = None
        threshold_seen = 0.0
        for sim, base in zip(sims, bases):
            sim.advance_to(job.release)
            result = sim.on_arrival(Job(job.id, job.release, job.processing, job.deadline))
            threshold_seen = sim.decisions[job.id].threshold
            if result is not None:
                placed = CommittedStart(job.id, base + result.machine, result.start)
                break
        decisions.add(DecisionRecord(job.id, placed is not None, job.release, threshold_seen))
        if placed is not None:
            starts.append(placed)
            volume += job.processing
            if trace is not None:
                trace.write(
                    f"{job.release:.9g} job={job.id} accept machine={placed.machine} "
                    f"start={placed.start:.9g}\n"
                )
        elif trace is not None:
            trace.write(f"{job.release:.9g} job={job.id} reject\n")
    return NonpreemptiveResult(decisions, starts, volume)


def randomized_virtual_machines(epsilon: float) -> int:
    """Virtual machine count minimising m^2 * rho^(1/m) + m over the two
    integers bracketing ln(rho)."""
    rho = (1.0 + epsilon) / epsilon
    log = math.log(rho)
    candidates = sorted({max(1, math.floor(log)), max(1, math.ceil(log))})
    return min(candidates, key=lambda m: (m * m * rho ** (1.0 / m) + m, m))


def randomized_single_parts(instance: Instance) -> tuple[int, list[list[CommittedStart]]]:
    """The virtual-machine decomposition behind the randomized policy.

    Runs the threshold allocator on the virtual machine count and splits
    the committed starts by virtual machine; the randomized policy keeps
    exactly one of these parts.
    """
    _validated(instance)
    if instance.machines != 1:
        raise ValueError("randomized wrapper is defined for single-machine instances")
    mv = randomized_virtual_machines(instance.epsilon)
    virtual = Instance(epsilon=instance.epsilon, machines=mv, jobs=instance.jobs)
    result = simulate_nonpreemptive(virtual)
    parts: list[list[CommittedStart]] = [[] for _ in range(mv)]
    for cs in result.starts:
        parts[cs.machine].append(cs)
    return mv, parts


def simulate_randomized_single(instance: Instance, seed: int) -> NonpreemptiveResult:
    """Randomized single-machine policy: simulate the allocator on virtual
    machines, then keep the jobs of one uniformly random virtual machine."""
    mv, parts = randomized_single_parts(instance)
    pick = random.Random(seed).randrange(mv)
    kept = {cs.job: cs for cs in parts[pick]}
    by_id = {j.id: j for j in instance.jobs}
    decisions = DecisionLog()
    starts = []
    volume = 0.0
    for job in instance.jobs:
        accepted = job.id in kept
        decisions.add(DecisionRecord(job.id, accepted, job.release, float(pick)))
        if accepted:
            starts.append(CommittedStart(job.id, 0, kept[job.id].start))
            volume += by_id[job.id].processing
    return NonpreemptiveResult(decisions, starts, volume)


def greedy_nonpreemptive(instance: Instance, trace: IO[str] | None = None) -> NonpreemptiveResult:
    """Baseline: accept whenever some machine can still meet the deadline,
    placing the job for the earliest completion (ties to the lowest id)."""
    _validated(instance)
    free = [0.0] * instance.machines  # absolute time each machine frees up
    decisions = DecisionLog()
    starts: list[CommittedStart] = []
    volume = 0.0
    for job in instance.jobs:
        options = []
        for i, f_time in enumerate(free):
            start = max(job.release, f_time)
            if start + job.processing <= job.deadline + TOL:
                options.append((start + job.processing, i, start))
        if options:
            _, machine, start = min(options)
            free[machine] = start + job.processing
            starts.append(CommittedStart(job.id, machine, start))
            decisions.add(DecisionRecord(job.id, True, job.release, start))
            volume += job.processing
            if trace is not None:
                trace.write(f"{job.release:.9g} job={job.id} accept machine={machine} start={start:.9g}\n")
        else:
            decisions.add(DecisionRecord(job.id, False, job.release, math.inf))
            if trace is not None:
                trace.write(f"{job.release:.9g} job={job.id} reject\n")
    return NonpreemptiveResult(decisions, starts, volume)


def committed_schedule(result: NonpreemptiveResult, instance: Instance):
    """Materialise committed starts as segments for verification."""
    from .model import Schedule, Segment

    by_id = {j.id: j for j in instance.jobs}
    sched = Schedule(machines=max((cs.machine for cs in result.starts), default=0) + 1)
    for cs in result.starts:
        job = by_id[cs.job]
        sched.segments.append(Segment(cs.machine, cs.job, cs.start, cs.start + job.processing))
    return sched
