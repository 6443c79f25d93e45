"""Event-driven execution of a scenario under an online policy.

Scheduling happens only at events: job arrivals and job completions.  At a
timestep carrying both, completions are handled first so that freed servers
are visible to arrival handling.  Before either callback runs, jobs that can no
longer finish before their deadline are expired.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Protocol, Sequence

from .model import Scenario
from .trace import Event, EventKind, ScheduleTrace, Segment


class Status(Enum):
    UNARRIVED = "unarrived"
    UNASSIGNED = "unassigned"
    RUNNING = "running"
    PREEMPTED = "preempted"
    COMPLETED = "completed"
    EXPIRED = "expired"


class PolicyViolation(RuntimeError):
    """A policy directive broke affinity, capacity or feasibility rules."""


@dataclass(frozen=True)
class Directive:
    job: int
    server: int


class Policy(Protocol):
    def on_arrival(self, view: "SimState", jobs: Sequence[int], t: int) -> Iterable[Directive]: ...

    def on_completion(self, view: "SimState", servers: Sequence[int], t: int) -> Iterable[Directive]: ...


class SimState:
    """Mutable bookkeeping of a run; also the read-only view handed to policies.

    Policies that need to reason about tentative decisions call :meth:`copy`,
    :meth:`assign` on the copy and return :meth:`directives_from` of it.
    """

    def __init__(self, scenario: Scenario):
        n, m = scenario.num_jobs, scenario.num_servers
        self.scenario = scenario
        self.demand = scenario.demand.tolist()
        self.t = scenario.t_min
        self.status = [Status.UNARRIVED] * n
        self.server_of: list[int | None] = [None] * n
        self.progress = [0] * n
        self.running: list[int | None] = [None] * m
        self.preempted: list[set[int]] = [set() for _ in range(m)]
        self.pool: set[int] = set()

    def copy(self) -> "SimState":
        other = SimState.__new__(SimState)
        other.scenario = self.scenario
        other.demand = self.demand
        other.t = self.t
        other.status = list(self.status)
        other.server_of = list(self.server_of)
        other.progress = list(self.progress)
        other.running = list(self.running)
        other.preempted = [set(s) for s in self.preempted]
        other.pool = set(self.pool)
        return other

    @property
    def num_servers(self) -> int:
        return len(self.running)

    def idle(self, server: int) -> bool:
        return self.running[server] is None

    def remaining(self, job: int, server: int) -> int | None:
        """Slots ``job`` still needs on ``server``; None if affinity forbids it."""
        owner = self.server_of[job]
        if owner is None:
            return self.demand[server][job]
        if owner != server:
            return None
        return self.demand[server][job] - self.progress[job]

    def fits(self, job: int, server: int, t: int | None = None) -> bool:
        rem = self.remaining(job, server)
        if rem is None:
            return False
        t = self.t if t is None else t
        return t + rem <= self.scenario.jobs[job].deadline

    def assignable(self, job: int, server: int) -> bool:
        st = self.status[job]
        if st is Status.UNASSIGNED:
            return True
        if st in (Status.PREEMPTED, Status.RUNNING):
            return self.server_of[job] == server
        return False

    def candidates(self, server: int) -> list[int]:
        return idle_resume_candidates(self, server, self.t)

    def assign(self, job: int, server: int) -> int | None:
        """Start (or keep) ``job`` on ``server``; returns the displaced job, if any."""
        if not self.assignable(job, server):
            raise PolicyViolation(
                f"t={self.t}: directive (job {job} -> server {server}) violates affinity "
                f"(status {self.status[job].value}, locked to {self.server_of[job]})"
            )
        current = self.running[server]
        if current == job:
            return None
        if not self.fits(job, server):
            raise PolicyViolation(
                f"t={self.t}: directive (job {job} -> server {server}) cannot finish before deadline"
            )
        self.vacate(server)
        if self.status[job] is Status.UNASSIGNED:
            self.pool.discard(job)
        else:
            self.preempted[server].discard(job)
        self.status[job] = Status.RUNNING
        self.server_of[job] = server
        self.running[server] = job
        return current

    def vacate(self, server: int) -> int | None:
        """Stop the job on ``server``; without progress it returns to the pool."""
        current = self.running[server]
        if current is None:
            return None
        if self.progress[current] > 0:
            self.status[current] = Status.PREEMPTED
            self.preempted[server].add(current)
        else:
            self.status[current] = Status.UNASSIGNED
            self.server_of[current] = None
            self.pool.add(current)
        self.running[server] = None
        return current

    def directives_from(self, draft: "SimState") -> list[Directive]:
        """Directives that turn this state's server occupancy into ``draft``'s."""
        return [
            Directive(job, i)
            for i, job in enumerate(draft.running)
            if job is not None and job != self.running[i]
        ]


def idle_resume_candidates(state: SimState, server: int, t: int) -> list[int]:
    """Jobs preempted on ``server`` or unassigned whose remaining demand fits, by id."""
    pool = state.preempted[server] | state.pool
    return sorted(j for j in pool if state.fits(j, server, t))


@dataclass
class JobOutcome:
    job: int
    status: Status
    server: int | None
    progress: int
    finish_time: int | None


@dataclass
class SimResult:
    total_value: float
    completed: dict[int, int]
    outcomes: list[JobOutcome]
    trace: ScheduleTrace
    preemptions: int = 0
    events: int = 0

    @property
    def completed_jobs(self) -> set[int]:
        return set(self.completed)


def run(scenario: Scenario, policy: Policy) -> SimResult:
    """Simulate ``scenario`` under ``policy``.

    Raises :class:`PolicyViolation` when a directive double-books a server,
    repeats a job, breaks affinity or schedules a job that cannot finish.
    """
    state = SimState(scenario)
    jobs = scenario.jobs
    m = scenario.num_servers
    demand = state.demand
    cv = scenario.completion_value
    trace = ScheduleTrace()
    seg_start: list[int | None] = [None] * m
    finish: list[int | None] = [None] * scenario.num_jobs
    min_demand = [min(demand[i][j] for i in range(m)) for j in range(scenario.num_jobs)]

    arrivals: dict[int, list[int]] = {}
    for job in jobs:
        arrivals.setdefault(job.arrival, []).append(job.id)
    arrival_times = sorted(arrivals, reverse=True)
    n_preempt = 0
    n_events = 0
    prev_t = None

    def close_segment(i: int, t: int) -> None:
        j = state.running[i]
        if j is not None and seg_start[i] is not None and seg_start[i] < t:
            trace.segments.append(Segment(i, j, seg_start[i], t))
        seg_start[i] = None

    def expire(j: int, t: int) -> None:
        st = state.status[j]
        if st is Status.UNASSIGNED:
            state.pool.discard(j)
        elif st is Status.PREEMPTED:
            state.preempted[state.server_of[j]].discard(j)
        state.status[j] = Status.EXPIRED
        srv = state.server_of[j]
        trace.events.append(Event(t, EventKind.EXPIRE, j, -1 if srv is None else srv))

    def sweep(t: int) -> None:
        for j in sorted(state.pool):
            if t + min_demand[j] > jobs[j].deadline:
                expire(j, t)
        for i in range(m):
            for j in sorted(state.preempted[i]):
                if not state.fits(j, i, t):
                    expire(j, t)

    def apply(directives: Iterable[Directive], t: int, arriving: frozenset[int]) -> None:
        nonlocal n_preempt
        directives = list(directives)
        seen_servers: set[int] = set()
        seen_jobs: set[int] = set()
        for d in directives:
            if not 0 <= d.server < m or not 0 <= d.job < len(jobs):
                raise PolicyViolation(f"t={t}: directive {d} references an unknown job or server")
            if d.server in seen_servers:
                raise PolicyViolation(f"t={t}: directive {d} double-books server {d.server}")
            if d.job in seen_jobs:
                raise PolicyViolation(f"t={t}: directive {d} repeats job {d.job}")
            seen_servers.add(d.server)
            seen_jobs.add(d.job)
        # free every target server first so a job bumped without progress
        # can restart elsewhere within the same event
        changes = [d for d in directives if state.running[d.server] != d.job]
        before = {d.job: state.status[d.job] for d in changes}
        for d in changes:
            close_segment(d.server, t)
            displaced = state.vacate(d.server)
            if displaced is not None and state.status[displaced] is Status.PREEMPTED:
                n_preempt += 1
                trace.events.append(Event(t, EventKind.PREEMPT, displaced, d.server))
        for d in changes:
            state.assign(d.job, d.server)
            seg_start[d.server] = t
            if before[d.job] is Status.PREEMPTED:
                kind = EventKind.RESUME
            elif d.job in arriving:
                kind = EventKind.ARRIVAL_SCHEDULE
            else:
                kind = EventKind.SCHEDULE
            trace.events.append(Event(t, kind, d.job, d.server))

    while True:
        next_completion = math.inf
        for i in range(m):
            j = state.running[i]
            if j is not None:
                next_completion = min(next_completion, prev_t + demand[i][j] - state.progress[j])
        next_arrival = arrival_times[-1] if arrival_times else math.inf
        t = min(next_completion, next_arrival)
        if t == math.inf:
            break
        t = int(t)
        if prev_t is not None:
            for i in range(m):
                j = state.running[i]
                if j is not None:
                    state.progress[j] += t - prev_t
        prev_t = t
        state.t = t
        n_events += 1

        done_servers = []
        for i in range(m):
            j = state.running[i]
            if j is not None and state.progress[j] == demand[i][j]:
                close_segment(i, t)
                state.running[i] = None
                state.status[j] = Status.COMPLETED
                finish[j] = t
                trace.events.append(Event(t, EventKind.COMPLETE, j, i))
                done_servers.append(i)

        sweep(t)
        if done_servers:
            apply(policy.on_completion(state, tuple(done_servers), t), t, frozenset())

        if next_arrival == t:
            arrival_times.pop()
            visible = []
            for j in arrivals[t]:
                if t + min_demand[j] > jobs[j].deadline:
                    state.status[j] = Status.EXPIRED
                    trace.events.append(Event(t, EventKind.ARRIVAL_REJECT, j, -1))
                    trace.events.append(Event(t, EventKind.EXPIRE, j, -1))
                    continue
                state.status[j] = Status.UNASSIGNED
                state.pool.add(j)
                visible.append(j)
            if visible:
                apply(policy.on_arrival(state, tuple(visible), t), t, frozenset(visible))
                for j in visible:
                    if state.status[j] is Status.UNASSIGNED:
                        trace.events.append(Event(t, EventKind.ARRIVAL_REJECT, j, -1))

    end_t = prev_t if prev_t is not None else scenario.t_min
    for j in range(scenario.num_jobs):
        if state.status[j] in (Status.UNASSIGNED, Status.PREEMPTED):
            srv = state.server_of[j]
            rem = min_demand[j] if srv is None else demand[srv][j] - state.progress[j]
            expire(j, max(end_t, jobs[j].deadline - rem + 1))

    completed = {e.job: e.server for e in trace.events if e.kind is EventKind.COMPLETE}
    total = math.fsum(cv[i, j] for j, i in completed.items())
    outcomes = [
        JobOutcome(j, state.status[j], state.server_of[j], state.progress[j], finish[j])
        for j in range(scenario.num_jobs)
    ]
    return SimResult(total, completed, outcomes, trace.canonical(), n_preempt, n_events)


def validate_trace(scenario: Scenario, trace: ScheduleTrace) -> None:
    """Check capacity, windows, affinity and completion accounting of a trace.

    Raises AssertionError describing the first violation found.
    """
    busy: dict[tuple[int, int], int] = {}
    owner: dict[int, int] = {}
    work: dict[int, int] = {}
    for seg in trace.segments:
        job = scenario.jobs[seg.job]
        assert job.arrival <= seg.start < seg.end <= job.deadline, f"{seg} outside window of job {job.id}"
        assert owner.setdefault(seg.job, seg.server) == seg.server, f"job {seg.job} migrated"
        for t in range(seg.start, seg.end):
            assert (seg.server, t) not in busy, f"server {seg.server} double-booked at t={t}"
            busy[seg.server, t] = seg.job
        work[seg.job] = work.get(seg.job, 0) + seg.end - seg.start
    demand = scenario.demand
    for e in trace.events:
        if e.kind is EventKind.COMPLETE:
            assert owner.get(e.job) == e.server, f"job {e.job} completed on a server it never ran on"
            assert work[e.job] == demand[e.server, e.job], f"job {e.job} completed with wrong work"
