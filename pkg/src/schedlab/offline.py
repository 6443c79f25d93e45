"""Exact offline optimum of the time-indexed scheduling formulation.

The formulation allocates binary ``y[i, t, j]`` (server, slot, job) subject to
capacity (one job per server per slot), windows (slots inside ``[a_j, d_j)``),
all-or-nothing demand (a job receives exactly its server demand or nothing)
and affinity (at most one server per job), maximising
``sum(vd[i, j] * sum_t y[i, t, j])`` with ``vd[i, j] = v_j psi_j^i / demand[i, j]``.

Because only completed jobs carry value, the search runs over completion
assignments (job -> server or rejected); a server's job set is realisable iff
preemptive earliest-deadline-first meets every deadline.  The allocation
tensor is then rebuilt slot by slot with EDF.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .model import Scenario
from .trace import Event, EventKind, ScheduleTrace, START_KINDS, segments_from_allocation


class IntegrityError(ValueError):
    """An allocation tensor violates the formulation's constraints."""


@dataclass(frozen=True)
class OfflineProblem:
    scenario: Scenario

    @property
    def demand(self) -> np.ndarray:
        return self.scenario.demand

    @property
    def vd(self) -> np.ndarray:
        return self.scenario.completion_value / self.scenario.demand

    @property
    def release(self) -> list[int]:
        return [j.arrival for j in self.scenario.jobs]

    @property
    def deadline(self) -> list[int]:
        return [j.deadline for j in self.scenario.jobs]


@dataclass
class OfflineSolution:
    problem: OfflineProblem
    assignment: list[int]
    y: np.ndarray
    objective: float
    certified: bool
    nodes: int = 0
    seconds: float = 0.0
    trace: ScheduleTrace = field(default_factory=ScheduleTrace)

    @property
    def completed(self) -> dict[int, int]:
        return {j: i for j, i in enumerate(self.assignment) if i >= 0}


def edf_allocation(scenario: Scenario, assignment: list[int]) -> np.ndarray:
    """Slot-by-slot EDF allocation of each server's assigned jobs.

    Ties on deadline go to the lower job id.  Raises IntegrityError if some
    assigned job misses its deadline.
    """
    span = scenario.t_max - scenario.t_min + 1
    y = np.zeros((scenario.num_servers, span, scenario.num_jobs), dtype=bool)
    demand = scenario.demand
    for i in range(scenario.num_servers):
        mine = [j for j, s in enumerate(assignment) if s == i]
        rem = {j: int(demand[i, j]) for j in mine}
        for t in range(scenario.t_min, scenario.t_max):
            ready = [
                j for j in mine
                if rem[j] > 0 and scenario.jobs[j].arrival <= t < scenario.jobs[j].deadline
            ]
            if not ready:
                continue
            j = min(ready, key=lambda k: (scenario.jobs[k].deadline, k))
            y[i, t - scenario.t_min, j] = True
            rem[j] -= 1
        late = [j for j in mine if rem[j] > 0]
        if late:
            raise IntegrityError(f"server {i}: jobs {late} cannot all meet their deadlines")
    return y


def solve_exact(
    problem: OfflineProblem | Scenario,
    node_limit: int = 0,
    time_limit: float = 0.0,
) -> OfflineSolution:
    """Certified-optimal offline schedule by branch and bound.

    With a node or time budget that runs out, the best assignment found so far
    is returned with ``certified=False``.
    """
    if isinstance(problem, Scenario):
        problem = OfflineProblem(problem)
    sc = problem.scenario
    start = time.perf_counter()
    assignment, _, nodes, complete = kernels.solve(
        problem.release,
        problem.deadline,
        sc.demand,
        sc.completion_value,
        node_limit=int(node_limit),
        time_limit=float(time_limit),
    )
    seconds = time.perf_counter() - start
    y = edf_allocation(sc, assignment)
    cv = sc.completion_value
    objective = math.fsum(cv[i, j] for j, i in enumerate(assignment) if i >= 0)
    sol = OfflineSolution(problem, list(assignment), y, objective, complete, nodes, seconds)
    sol.trace = extract_decision_trace(sol)
    return sol


def extract_decision_trace(solution: OfflineSolution) -> ScheduleTrace:
    """Chronological schedule/preempt/resume/complete events implied by ``y``.

    Raises IntegrityError when ``y`` breaks a formulation constraint.
    """
    sc = solution.problem.scenario
    violations = constraint_violations(sc, solution.y)
    if violations:
        raise IntegrityError("; ".join(violations))
    y = solution.y
    t0 = sc.t_min
    events: list[Event] = []
    for job in sc.jobs:
        j = job.id
        servers = np.flatnonzero(y[:, :, j].any(axis=1))
        if len(servers) == 0:
            events.append(Event(job.arrival, EventKind.ARRIVAL_REJECT, j))
            continue
        i = int(servers[0])
        slots = np.flatnonzero(y[i, :, j]) + t0
        first = int(slots[0])
        if first == job.arrival:
            events.append(Event(first, EventKind.ARRIVAL_SCHEDULE, j, i))
        else:
            events.append(Event(job.arrival, EventKind.ARRIVAL_REJECT, j))
            events.append(Event(first, EventKind.SCHEDULE, j, i))
        for prev, nxt in zip(slots[:-1], slots[1:]):
            if nxt != prev + 1:
                events.append(Event(int(prev) + 1, EventKind.PREEMPT, j, i))
                events.append(Event(int(nxt), EventKind.RESUME, j, i))
        events.append(Event(int(slots[-1]) + 1, EventKind.COMPLETE, j, i))
    return ScheduleTrace(segments_from_allocation(y, t0), events).canonical()


def constraint_violations(scenario: Scenario, y: np.ndarray) -> list[str]:
    """Capacity, window, all-or-nothing and affinity checks on ``y[i, t, j]``."""
    out = []
    m, span, n = y.shape
    if (m, n) != (scenario.num_servers, scenario.num_jobs) or span != scenario.t_max - scenario.t_min + 1:
        return [f"allocation shape {y.shape} does not match scenario"]
    load = y.sum(axis=2)
    for i, k in zip(*np.nonzero(load > 1)):
        out.append(f"capacity: server {i} runs {load[i, k]} jobs at t={k + scenario.t_min}")
    times = np.arange(span) + scenario.t_min
    demand = scenario.demand
    for job in scenario.jobs:
        j = job.id
        outside = (times < job.arrival) | (times >= job.deadline)
        if y[:, outside, j].any():
            out.append(f"window: job {j} allocated outside [{job.arrival}, {job.deadline})")
        alloc = y[:, :, j].sum(axis=1)
        used = np.flatnonzero(alloc)
        if len(used) > 1:
            out.append(f"affinity: job {j} allocated on servers {used.tolist()}")
        for i in used:
            if alloc[i] != demand[i, j]:
                out.append(f"demand: job {j} got {alloc[i]} of {demand[i, j]} slots on server {i}")
    return out


def objective_from_allocation(scenario: Scenario, y: np.ndarray) -> float:
    """``sum(vd * alloc)`` evaluated literally on the allocation tensor."""
    vd = scenario.completion_value / scenario.demand
    alloc = y.sum(axis=1)
    return float(np.sum(vd * alloc))


def off_event_decisions(scenario: Scenario, trace: ScheduleTrace) -> list[Event]:
    """Start/preempt decisions taken at a time with no arrival or completion."""
    event_times = {j.arrival for j in scenario.jobs}
    event_times |= {e.time for e in trace.events if e.kind is EventKind.COMPLETE}
    return [
        e for e in trace.events
        if (e.kind in START_KINDS or e.kind is EventKind.PREEMPT) and e.time not in event_times
    ]
