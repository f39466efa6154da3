# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled flow kernels. Same contracts as ``_flowpy``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()

FLOW_TOL = 1e-14


cdef struct Net:
    int n
    int m
    double tol
    double *s_res
    double *t_res
    double *F
    unsigned char *adj
    int *lvl_l
    int *lvl_r
    int *ptr_l
    int *ptr_r
    int lvl_t


cdef double push_left(Net *g, int i, double cap) nogil:
    cdef int j
    cdef double d
    while g.ptr_l[i] < g.m:
        j = g.ptr_l[i]
        if g.adj[i * g.m + j] and g.lvl_r[j] == g.lvl_l[i] + 1:
            d = push_right(g, j, cap)
            if d > g.tol:
                g.F[i * g.m + j] += d
                return d
        g.ptr_l[i] += 1
    return 0.0


cdef double push_right(Net *g, int j, double cap) nogil:
    cdef int i
    cdef double d, f
    if g.lvl_r[j] + 1 == g.lvl_t:
        if g.t_res[j] > g.tol:
            d = cap if cap < g.t_res[j] else g.t_res[j]
            g.t_res[j] -= d
            return d
        return 0.0
    while g.ptr_r[j] < g.n:
        i = g.ptr_r[j]
        f = g.F[i * g.m + j]
        if g.lvl_l[i] == g.lvl_r[j] + 1 and f > g.tol:
            d = push_left(g, i, cap if cap < f else f)
            if d > g.tol:
                g.F[i * g.m + j] -= d
                return d
        g.ptr_r[j] += 1
    return 0.0


def bipartite_max_flow(supply, demand, adj, double tol=FLOW_TOL):
    cdef cnp.ndarray[cnp.uint8_t, ndim=2, mode="c"] A = np.ascontiguousarray(adj, dtype=np.uint8)
    cdef int n = A.shape[0]
    cdef int m = A.shape[1]
    cdef cnp.ndarray[double, ndim=1] s_res = np.array(supply, dtype=float)
    cdef cnp.ndarray[double, ndim=1] t_res = np.array(demand, dtype=float)
    cdef cnp.ndarray[double, ndim=2, mode="c"] F = np.zeros((n, m))
    cdef cnp.ndarray[int, ndim=1] lvl_l = np.empty(n, dtype=np.intc)
    cdef cnp.ndarray[int, ndim=1] lvl_r = np.empty(m, dtype=np.intc)
    cdef cnp.ndarray[int, ndim=1] ptr_l = np.empty(n, dtype=np.intc)
    cdef cnp.ndarray[int, ndim=1] ptr_r = np.empty(m, dtype=np.intc)
    cdef cnp.ndarray[int, ndim=1] front = np.empty(n, dtype=np.intc)
    cdef cnp.ndarray[int, ndim=1] nxt = np.empty(m, dtype=np.intc)
    cdef Net g
    cdef int i, j, k, nf, nn, depth, hit
    cdef double total = 0.0, d

    g.n = n
    g.m = m
    g.tol = tol
    g.s_res = &s_res[0] if n else NULL
    g.t_res = &t_res[0] if m else NULL
    g.F = &F[0, 0] if n and m else NULL
    g.adj = &A[0, 0] if n and m else NULL
    g.lvl_l = &lvl_l[0] if n else NULL
    g.lvl_r = &lvl_r[0] if m else NULL
    g.ptr_l = &ptr_l[0] if n else NULL
    g.ptr_r = &ptr_r[0] if m else NULL
    if n == 0 or m == 0:
        return 0.0, F

    while True:
        nf = 0
        for i in range(n):
            lvl_l[i] = -1
            ptr_l[i] = 0
            if s_res[i] > tol:
                lvl_l[i] = 1
                front[nf] = i
                nf += 1
        for j in range(m):
            lvl_r[j] = -1
            ptr_r[j] = 0
        g.lvl_t = -1
        depth = 1
        while nf > 0 and g.lvl_t < 0:
            nn = 0
            for k in range(nf):
                i = front[k]
                for j in range(m):
                    if A[i, j] and lvl_r[j] < 0:
                        lvl_r[j] = depth + 1
                        nxt[nn] = j
                        nn += 1
            if nn == 0:
                break
            hit = 0
            for k in range(nn):
                if t_res[nxt[k]] > tol:
                    hit = 1
                    break
            if hit:
                g.lvl_t = depth + 2
                break
            nf = 0
            for k in range(nn):
                j = nxt[k]
                for i in range(n):
                    if lvl_l[i] < 0 and F[i, j] > tol:
                        lvl_l[i] = depth + 2
                        front[nf] = i
                        nf += 1
            depth += 2
        if g.lvl_t < 0:
            break
        for i in range(n):
            if lvl_l[i] != 1:
                continue
            while s_res[i] > tol:
                d = push_left(&g, i, s_res[i])
                if d <= tol:
                    break
                s_res[i] -= d
                total += d
    return total, F


def interval_flow_1d(a, wa, b, wb, double eps):
    cdef cnp.ndarray[double, ndim=1] av = np.ascontiguousarray(a, dtype=float)
    cdef cnp.ndarray[double, ndim=1] bv = np.ascontiguousarray(b, dtype=float)
    cdef cnp.ndarray[double, ndim=1] wav = np.ascontiguousarray(wa, dtype=float)
    cdef cnp.ndarray[double, ndim=1] rem = np.array(wb, dtype=float)
    cdef Py_ssize_t n = av.shape[0], m = bv.shape[0], i, j = 0, k
    cdef double total = 0.0, need, take, ai
    for i in range(n):
        ai = av[i]
        while j < m and (ai - bv[j] > eps or rem[j] <= 0.0):
            j += 1
        need = wav[i]
        k = j
        while need > 0.0 and k < m and fabs(bv[k] - ai) <= eps:
            take = need if need < rem[k] else rem[k]
            need -= take
            rem[k] -= take
            total += take
            k += 1
    return total
