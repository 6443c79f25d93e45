"""Pure-Python branch-and-bound kernel.

Mirrors ``_bnb.pyx`` node for node: same job order, same branch order, same
incumbent updates.  Only the single-machine feasibility test differs in
mechanics (event-driven EDF here, interval load condition in the extension);
both decide the same predicate.
"""

from __future__ import annotations

import heapq
import time


def edf_feasible(members, release, deadline, dem) -> bool:
    """Preemptive single-machine feasibility of ``members`` by EDF simulation.

    Windows are half-open ``[release, deadline)``; ``dem[k]`` is the work of job k.
    """
    jobs = sorted(members, key=lambda k: release[k])
    heap: list[tuple[int, int, int]] = []
    rem = {}
    t = 0
    idx = 0
    n = len(jobs)
    while idx < n or heap:
        if not heap:
            t = max(t, release[jobs[idx]])
        while idx < n and release[jobs[idx]] <= t:
            k = jobs[idx]
            rem[k] = dem[k]
            heapq.heappush(heap, (deadline[k], k, 0))
            idx += 1
        d, k, _ = heap[0]
        horizon = release[jobs[idx]] if idx < n else None
        run = rem[k] if horizon is None else min(rem[k], horizon - t)
        t += run
        rem[k] -= run
        if rem[k] == 0:
            heapq.heappop(heap)
            if t > d:
                return False
    return True


def solve(release, deadline, demand, value, node_limit=0, time_limit=0.0):
    """Exact search over job -> server-or-reject assignments.

    Parameters are plain sequences: ``release[j]``, ``deadline[j]`` (exclusive),
    ``demand[i][j]`` and ``value[i][j]``.  A zero limit means unlimited.

    Returns ``(assignment, value, nodes, complete)`` where ``assignment[j]`` is
    a server index or -1 and ``complete`` is False when a limit cut the search.
    """
    m = len(demand)
    n = len(release)
    ok = [[deadline[j] - release[j] >= demand[i][j] for j in range(n)] for i in range(m)]
    best_val = [max((value[i][j] for i in range(m) if ok[i][j]), default=0.0) for j in range(n)]
    order = sorted(range(n), key=lambda j: (-best_val[j], j))
    branch = [
        sorted((i for i in range(m) if ok[i][j]), key=lambda i: (-value[i][j], i)) for j in range(n)
    ]
    suffix = [0.0] * (n + 1)
    for k in range(n - 1, -1, -1):
        suffix[k] = suffix[k + 1] + best_val[order[k]]

    members: list[list[int]] = [[] for _ in range(m)]
    assign = [-1] * n

    def fits(i, j):
        return edf_feasible(members[i] + [j], release, deadline, demand[i])

    # greedy incumbent in branching order
    inc_val = 0.0
    for j in order:
        for i in branch[j]:
            if fits(i, j):
                members[i].append(j)
                assign[j] = i
                inc_val += value[i][j]
                break
    best = {"val": inc_val, "assign": list(assign)}
    members = [[] for _ in range(m)]
    assign = [-1] * n

    nodes = 0
    aborted = False
    start = time.perf_counter()

    def dfs(k, cur):
        nonlocal nodes, aborted
        nodes += 1
        if node_limit and nodes > node_limit:
            aborted = True
            return
        if time_limit and (nodes & 1023) == 0 and time.perf_counter() - start > time_limit:
            aborted = True
            return
        if cur + suffix[k] <= best["val"] * (1.0 + 1e-12):
            return
        if k == n:
            best["val"] = cur
            best["assign"] = list(assign)
            return
        j = order[k]
        for i in branch[j]:
            if fits(i, j):
                members[i].append(j)
                assign[j] = i
                dfs(k + 1, cur + value[i][j])
                members[i].pop()
                assign[j] = -1
                if aborted:
                    return
        dfs(k + 1, cur)

    dfs(0, 0.0)
    return best["assign"], best["val"], nodes, not aborted
