# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled branch-and-bound kernel; see ``bnb_py`` for the reference version."""

from libc.time cimport clock, clock_t, CLOCKS_PER_SEC

import numpy as np


cdef struct Search:
    int n
    int m
    long *release
    long *deadline
    long *demand      # m * n
    double *value     # m * n
    int *order
    int *branch       # n * m, -1 terminated
    double *suffix
    int *members      # m * n
    int *count
    int *assign
    int *best_assign
    double best_val
    long nodes
    long node_limit
    double time_limit
    clock_t start
    bint aborted


cdef bint fits(Search *s, int i, int j) noexcept nogil:
    # interval load test: every [r, d) spanning j's window must hold its load
    cdef int c = s.count[i]
    cdef int *mem = s.members + i * s.n
    cdef long *dem = s.demand + i * s.n
    cdef long rj = s.release[j]
    cdef long dj = s.deadline[j]
    cdef int a, b, k, q
    cdef long r, d, load
    for a in range(c + 1):
        r = rj if a == c else s.release[mem[a]]
        if r > rj:
            continue
        for b in range(c + 1):
            d = dj if b == c else s.deadline[mem[b]]
            if d < dj:
                continue
            load = 0
            if rj >= r and dj <= d:
                load = dem[j]
            for q in range(c):
                k = mem[q]
                if s.release[k] >= r and s.deadline[k] <= d:
                    load += dem[k]
            if load > d - r:
                return False
    return True


cdef void dfs(Search *s, int k, double cur) noexcept nogil:
    cdef int j, i, b
    s.nodes += 1
    if s.node_limit > 0 and s.nodes > s.node_limit:
        s.aborted = True
        return
    if s.time_limit > 0 and (s.nodes & 1023) == 0:
        if (<double>(clock() - s.start)) / CLOCKS_PER_SEC > s.time_limit:
            s.aborted = True
            return
    if cur + s.suffix[k] <= s.best_val * (1.0 + 1e-12):
        return
    if k == s.n:
        s.best_val = cur
        for j in range(s.n):
            s.best_assign[j] = s.assign[j]
        return
    j = s.order[k]
    b = 0
    while b < s.m:
        i = s.branch[j * s.m + b]
        if i < 0:
            break
        if fits(s, i, j):
            s.members[i * s.n + s.count[i]] = j
            s.count[i] += 1
            s.assign[j] = i
            dfs(s, k + 1, cur + s.value[i * s.n + j])
            s.count[i] -= 1
            s.assign[j] = -1
            if s.aborted:
                return
        b += 1
    dfs(s, k + 1, cur)


def _prepare(release, deadline, demand, value):
    rel = np.ascontiguousarray(release, dtype=np.int64)
    dl = np.ascontiguousarray(deadline, dtype=np.int64)
    dem = np.ascontiguousarray(demand, dtype=np.int64).reshape(-1, rel.shape[0])
    val = np.ascontiguousarray(value, dtype=np.float64).reshape(dem.shape)
    n = rel.shape[0]
    m = dem.shape[0]
    ok = (dl - rel)[None, :] >= dem
    best = [max((float(val[i, j]) for i in range(m) if ok[i, j]), default=0.0) for j in range(n)]
    order = sorted(range(n), key=lambda j: (-best[j], j))
    branch = np.full((n, m), -1, dtype=np.int32)
    for j in range(n):
        srv = sorted((i for i in range(m) if ok[i, j]), key=lambda i: (-float(val[i, j]), i))
        branch[j, : len(srv)] = srv
    suffix = [0.0] * (n + 1)
    for k in range(n - 1, -1, -1):
        suffix[k] = suffix[k + 1] + best[order[k]]
    return (rel, dl, dem, val, np.asarray(order, dtype=np.int32), branch,
            np.asarray(suffix, dtype=np.float64))


def solve(release, deadline, demand, value, long node_limit=0, double time_limit=0.0):
    """Same contract as ``bnb_py.solve``."""
    if len(release) == 0:
        return [], 0.0, 1, True
    rel_a, dl_a, dem_a, val_a, order_a, branch_a, suffix_a = _prepare(release, deadline, demand, value)
    cdef long[::1] rel = rel_a
    cdef long[::1] dl = dl_a
    cdef long[:, ::1] dem = dem_a
    cdef double[:, ::1] val = val_a
    cdef int[::1] order = order_a
    cdef int[:, ::1] branch = branch_a
    cdef double[::1] suffix = suffix_a
    cdef int n = rel.shape[0]
    cdef int m = dem.shape[0]
    cdef int[:, ::1] members = np.zeros((m, n), dtype=np.int32)
    cdef int[::1] count = np.zeros(m, dtype=np.int32)
    cdef int[::1] assign = np.full(n, -1, dtype=np.int32)
    cdef int[::1] best_assign = np.full(n, -1, dtype=np.int32)

    cdef Search s
    s.n = n
    s.m = m
    s.release = &rel[0]
    s.deadline = &dl[0]
    s.demand = &dem[0, 0]
    s.value = &val[0, 0]
    s.order = &order[0]
    s.branch = &branch[0, 0]
    s.suffix = &suffix[0]
    s.members = &members[0, 0]
    s.count = &count[0]
    s.assign = &assign[0]
    s.best_assign = &best_assign[0]
    s.nodes = 0
    s.node_limit = node_limit
    s.time_limit = time_limit
    s.aborted = False

    # greedy incumbent in branching order
    cdef int kk, bb, ii, jj
    cdef double inc = 0.0
    for kk in range(n):
        jj = order[kk]
        for bb in range(m):
            ii = branch[jj, bb]
            if ii < 0:
                break
            if fits(&s, ii, jj):
                s.members[ii * n + s.count[ii]] = jj
                s.count[ii] += 1
                best_assign[jj] = ii
                inc += val[ii, jj]
                break
    s.best_val = inc
    for ii in range(m):
        count[ii] = 0

    s.start = clock()
    with nogil:
        dfs(&s, 0, 0.0)
    return [int(x) for x in best_assign], float(s.best_val), int(s.nodes), not s.aborted
