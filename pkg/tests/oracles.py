"""Independent reference implementations used as test oracles.

The brute-force optimum enumerates every job -> server-or-reject map and
checks each server's job set by matching unit demands to time slots, so it
shares no logic with the branch-and-bound search or its EDF packing.
"""

from __future__ import annotations

import itertools
import math
from functools import lru_cache

from schedlab.model import Scenario


def slots_packable(windows: list[tuple[int, int, int]]) -> bool:
    """Whether unit demands fit into distinct slots of their windows.

    ``windows`` holds ``(release, deadline, demand)`` with slots ``[release, deadline)``.
    Augmenting-path bipartite matching over (job unit) x (slot).
    """
    units = [(r, d) for r, d, p in windows for _ in range(p)]
    owner: dict[int, int] = {}

    def augment(u: int, seen: set[int]) -> bool:
        r, d = units[u]
        for t in range(r, d):
            if t in seen:
                continue
            seen.add(t)
            if t not in owner or augment(owner[t], seen):
                owner[t] = u
                return True
        return False

    return all(augment(u, set()) for u in range(len(units)))


def brute_force_optimum(scenario: Scenario) -> tuple[float, tuple[int, ...]]:
    """Exhaustive maximum of completed value; returns (value, assignment)."""
    n, m = scenario.num_jobs, scenario.num_servers
    demand = scenario.demand
    cv = scenario.completion_value
    jobs = scenario.jobs

    @lru_cache(maxsize=None)
    def feasible(server: int, members: frozenset[int]) -> bool:
        return slots_packable([(jobs[j].arrival, jobs[j].deadline, int(demand[server, j])) for j in members])

    best_val, best_assign = 0.0, tuple([-1] * n)
    for assign in itertools.product(range(-1, m), repeat=n):
        ok = True
        for i in range(m):
            members = frozenset(j for j in range(n) if assign[j] == i)
            if members and not feasible(i, members):
                ok = False
                break
        if not ok:
            continue
        val = math.fsum(cv[i, j] for j, i in enumerate(assign) if i >= 0)
        if val > best_val:
            best_val, best_assign = val, assign
    return best_val, best_assign


def value_density_slots(jobs: list[tuple[int, int, int, float]], gamma: float = 1.0) -> list[int | None]:
    """Single-server value-density rule with threshold preemption, written
    slot by slot as a check on the event-driven engine.

    ``jobs`` holds ``(arrival, deadline, proc, value)``.  Returns the job run
    in each slot ``0 .. max deadline - 1`` (None when idle).  Arrivals and
    completions at the same slot are merged into one decision, which agrees
    with the engine's completion-then-arrival order when ``gamma == 1``.
    """
    n = len(jobs)
    rho = [v / p for _, _, p, v in jobs]
    progress = [0] * n
    done = [False] * n
    running = None
    horizon = max(d for _, d, _, _ in jobs)
    slots: list[int | None] = []
    for t in range(horizon):
        completed = running is not None and progress[running] == jobs[running][2]
        if completed:
            done[running] = True
            running = None
        if completed or any(a == t for a, _, _, _ in jobs):
            live = [
                j for j in range(n)
                if not done[j] and j != running and jobs[j][0] <= t and t + jobs[j][2] - progress[j] <= jobs[j][1]
            ]
            if completed:
                resumable = [j for j in live if progress[j] > 0]
                if resumable:
                    running = max(resumable, key=lambda j: (rho[j], -j))
                    live.remove(running)
            if live:
                best = max(live, key=lambda j: (rho[j], -j))
                if running is None or rho[best] > gamma * rho[running]:
                    running = best
        slots.append(running)
        if running is not None:
            progress[running] += 1
    return slots
