"""Pure-Python flow kernels; reference implementation of ``_core.pyx``.

Both routines work on bipartite networks source -> left -> right -> sink
where the left->right arcs have unbounded capacity.
"""
import sys

import numpy as np

FLOW_TOL = 1e-14


def bipartite_max_flow(supply, demand, adj, tol=FLOW_TOL):
    """Dinic max flow; ``adj[i, j]`` marks the arc left i -> right j.

    Returns ``(value, flow)`` where ``flow`` is the n x m arc flow matrix.
    """
    supply = np.asarray(supply, dtype=float)
    demand = np.asarray(demand, dtype=float)
    adj = np.asarray(adj, dtype=bool)
    n, m = adj.shape
    # augmenting paths alternate left/right, so depth is bounded by 2 * (n + m)
    sys.setrecursionlimit(max(sys.getrecursionlimit(), 4 * (n + m) + 100))
    s_res = supply.tolist()
    t_res = demand.tolist()
    A = adj.tolist()
    nbr = [[j for j in range(m) if A[i][j]] for i in range(n)]
    F = [[0.0] * m for _ in range(n)]
    total = 0.0

    while True:
        lvl_l = [-1] * n
        lvl_r = [-1] * m
        frontier = [i for i in range(n) if s_res[i] > tol]
        for i in frontier:
            lvl_l[i] = 1
        lvl_t = -1
        depth = 1
        while frontier and lvl_t < 0:
            nxt = []
            for i in frontier:
                for j in nbr[i]:
                    if lvl_r[j] < 0:
                        lvl_r[j] = depth + 1
                        nxt.append(j)
            if not nxt:
                break
            if any(t_res[j] > tol for j in nxt):
                lvl_t = depth + 2
                break
            frontier = []
            for j in nxt:
                for i in range(n):
                    if lvl_l[i] < 0 and F[i][j] > tol:
                        lvl_l[i] = depth + 2
                        frontier.append(i)
            depth += 2
        if lvl_t < 0:
            break

        ptr_l = [0] * n
        ptr_r = [0] * m

        def push_left(i, cap):
            nb = nbr[i]
            while ptr_l[i] < len(nb):
                j = nb[ptr_l[i]]
                if lvl_r[j] == lvl_l[i] + 1:
                    d = push_right(j, cap)
                    if d > tol:
                        F[i][j] += d
                        return d
                ptr_l[i] += 1
            return 0.0

        def push_right(j, cap):
            if lvl_r[j] + 1 == lvl_t:
                if t_res[j] > tol:
                    d = min(cap, t_res[j])
                    t_res[j] -= d
                    return d
                return 0.0
            while ptr_r[j] < n:
                i = ptr_r[j]
                if lvl_l[i] == lvl_r[j] + 1 and F[i][j] > tol:
                    d = push_left(i, min(cap, F[i][j]))
                    if d > tol:
                        F[i][j] -= d
                        return d
                ptr_r[j] += 1
            return 0.0

        for i in range(n):
            if lvl_l[i] != 1:
                continue
            while s_res[i] > tol:
                d = push_left(i, s_res[i])
                if d <= tol:
                    break
                s_res[i] -= d
                total += d
    return total, np.array(F, dtype=float).reshape(n, m)


def interval_flow_1d(a, wa, b, wb, eps):
    """Max flow when left i links right j iff |a_i - b_j| <= eps.

    ``a`` and ``b`` must be sorted ascending. The admissible windows are then
    monotone, and filling the leftmost open target first is optimal.
    """
    a = np.asarray(a, dtype=float).tolist()
    b = np.asarray(b, dtype=float).tolist()
    wa = np.asarray(wa, dtype=float).tolist()
    rem = np.asarray(wb, dtype=float).tolist()
    m = len(b)
    j = 0
    total = 0.0
    for i in range(len(a)):
        ai = a[i]
        while j < m and (ai - b[j] > eps or rem[j] <= 0.0):
            j += 1
        need = wa[i]
        k = j
        while need > 0.0 and k < m and abs(b[k] - ai) <= eps:
            take = need if need < rem[k] else rem[k]
            need -= take
            rem[k] -= take
            total += take
            k += 1
    return total
