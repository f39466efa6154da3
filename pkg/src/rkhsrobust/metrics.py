"""Distances between finite-support probability measures.

Points are compared with the Euclidean norm on the full vector ``(x, y)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import coo_matrix, vstack
from scipy.spatial.distance import cdist

from . import _backend
from .distributions import DiscreteDistribution, moment
from .losses import GaugeSpec

MARGINAL_TOL = 1e-9


class MarginalMismatch(ValueError):
    """Transport marginals do not have equal unit mass."""


@dataclass(frozen=True)
class TransportPlan:
    plan: np.ndarray
    value: float
    row_marginal: np.ndarray
    col_marginal: np.ndarray
    row_dual: np.ndarray
    col_dual: np.ndarray


@dataclass(frozen=True)
class ZetaEstimate:
    """Fortet-Mourier distance: exact value when available, otherwise bounds."""

    exact: Optional[float]
    upper_ot: float
    upper_product: float
    lower_testfn: float

    def __post_init__(self):
        tol = 1e-9 * max(1.0, self.upper_product)
        ok = self.lower_testfn <= self.upper_ot + tol and self.upper_ot <= self.upper_product + tol
        if self.exact is not None:
            ok = ok and self.lower_testfn <= self.exact + tol and self.exact <= self.upper_ot + tol
        if not ok:
            raise ArithmeticError(f"inconsistent Fortet-Mourier bounds: {self}")

    @property
    def best(self) -> float:
        """Tightest value that is still an upper bound."""
        return self.exact if self.exact is not None else self.upper_ot


def _scalar_pair(P: DiscreteDistribution, Q: DiscreteDistribution):
    if P.dim != 1 or Q.dim != 1:
        raise ValueError("scalar distributions required")
    return P.atoms[:, 0], P.weights, Q.atoms[:, 0], Q.weights


def _w1_line(a, wa, b, wb) -> float:
    # F_P - F_Q from two separate cumulative sums: swapping the arguments
    # only flips the sign, so the value is exactly symmetric and P = P gives 0
    pts, inv = np.unique(np.concatenate([a, b]), return_inverse=True)
    if pts.size == 1:
        return 0.0
    inv = inv.ravel()
    Fa = np.cumsum(np.bincount(inv[:len(a)], weights=wa, minlength=pts.size))
    Fb = np.cumsum(np.bincount(inv[len(a):], weights=wb, minlength=pts.size))
    return float(np.abs(Fa - Fb)[:-1] @ np.diff(pts))


def _canonical(P: DiscreteDistribution, Q: DiscreteDistribution):
    """Order a pair by its bytes so that symmetric metrics are bitwise symmetric."""
    kp = (P.atoms.shape, P.atoms.tobytes(), P.weights.tobytes())
    kq = (Q.atoms.shape, Q.atoms.tobytes(), Q.weights.tobytes())
    return (Q, P) if kq < kp else (P, Q)


def wasserstein1_1d(P: DiscreteDistribution, Q: DiscreteDistribution) -> float:
    """Area between the two step CDFs."""
    a, wa, b, wb = _scalar_pair(P, Q)
    return _w1_line(a, wa, b, wb)


def discrete_ot(cost, w_src, w_dst) -> TransportPlan:
    """Exact transport LP over the polytope with the given marginals (HiGHS simplex)."""
    C = np.asarray(cost, dtype=float)
    a = np.asarray(w_src, dtype=float).ravel()
    b = np.asarray(w_dst, dtype=float).ravel()
    n, m = C.shape
    if a.size != n or b.size != m:
        raise MarginalMismatch("marginal sizes do not match the cost matrix")
    if abs(a.sum() - 1) > MARGINAL_TOL or abs(b.sum() - 1) > MARGINAL_TOL or (a < 0).any() or (b < 0).any():
        raise MarginalMismatch("marginals must be nonnegative with unit mass")
    if (C < 0).any():
        raise ValueError("costs must be nonnegative")
    if n == 1 or m == 1:
        # the coupling is forced; duals are read off the single row/column
        plan = np.outer(a, b)
        if n == 1:
            u, v = np.zeros(1), C[0].copy()
        else:
            u, v = C[:, 0].copy(), np.zeros(1)
        return TransportPlan(plan, float((plan * C).sum()), a, b, u, v)

    cols = np.arange(n * m)
    A_row = coo_matrix((np.ones(n * m), (np.repeat(np.arange(n), m), cols)), shape=(n, n * m))
    A_col = coo_matrix((np.ones(n * m), (np.tile(np.arange(m), n), cols)), shape=(m, n * m))
    # the last column constraint is implied by the others
    A = vstack([A_row, A_col]).tocsr()[:-1]
    res = linprog(
        C.ravel(), A_eq=A, b_eq=np.concatenate([a, b[:-1]]),
        bounds=(0, None), method="highs-ds",
        options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
    )
    if res.status != 0:
        raise RuntimeError(f"transport LP failed: {res.message}")
    plan = np.maximum(res.x.reshape(n, m), 0.0)
    duals = res.eqlin.marginals
    u = np.array(duals[:n])
    v = np.concatenate([duals[n:], [0.0]])
    return TransportPlan(plan, float((plan * C).sum()), a, b, u, v)


def _pairwise_rows(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    if A.shape[1] == 1:
        return np.abs(A[:, 0][:, None] - B[:, 0][None, :])
    return cdist(A, B)


def _pairwise(P: DiscreteDistribution, Q: DiscreteDistribution) -> np.ndarray:
    if P.dim != Q.dim:
        raise ValueError("distributions live in different spaces")
    return _pairwise_rows(P.atoms, Q.atoms)


def _flow_within(P, Q, D, eps, tol) -> float:
    if P.dim == 1:
        a, wa, b, wb = _scalar_pair(P, Q)
        ia = np.argsort(a, kind="mergesort")
        ib = np.argsort(b, kind="mergesort")
        return _backend.interval_flow_1d(a[ia], wa[ia], b[ib], wb[ib], eps)
    value, _ = _backend.bipartite_max_flow(P.weights, Q.weights, D <= eps, tol)
    return value


def prokhorov(P: DiscreteDistribution, Q: DiscreteDistribution, tol: float = 1e-9) -> float:
    """Prokhorov distance via the coupling characterisation.

    The mass that can be moved within distance eps is a max flow F(eps),
    piecewise constant between the sorted pairwise distances d_k. The value
    is min_k max(d_k, 1 - F(d_k)); its crossing point is found by bisection
    over the breakpoints, so the result is exact up to the flow tolerance.
    """
    P, Q = _canonical(P, Q)
    D = _pairwise(P, Q)
    cand = np.unique(np.concatenate([[0.0], D[D < 1.0].ravel()]))
    flow_tol = min(tol, _backend.FLOW_TOL) if tol > 0 else _backend.FLOW_TOL
    # a deficit this small is rounding in the weight sums, not unmoved mass
    slack = 8.0 * np.finfo(float).eps * (P.size + Q.size)

    def excess(k):
        e = 1.0 - _flow_within(P, Q, D, cand[k], flow_tol)
        return 0.0 if e <= slack else e

    lo, hi = 0, len(cand)  # first k with cand[k] >= 1 - F(cand[k]) lies in [lo, hi]
    cache = {}
    while lo < hi:
        mid = (lo + hi) // 2
        cache[mid] = excess(mid)
        if cand[mid] >= cache[mid]:
            hi = mid
        else:
            lo = mid + 1
    k = lo
    prev = 1.0 if k == 0 else cache.get(k - 1, None)
    if prev is None:
        prev = excess(k - 1)
    if k == len(cand):
        val = prev
    else:
        val = min(cand[k], prev)
    return float(min(max(val, 0.0), 1.0))


def d_phi(P: DiscreteDistribution, Q: DiscreteDistribution, g: GaugeSpec,
          power: float = 1.0, tol: float = 1e-9) -> float:
    """Prokhorov distance plus the gap between phi^power moments."""
    return prokhorov(P, Q, tol) + abs(moment(P, g, power) - moment(Q, g, power))


def growth_transform(t, p: float):
    """h(t) = integral_0^t max(1, |s|)^(p-1) ds, applied elementwise."""
    t = np.asarray(t, dtype=float)
    s = np.abs(t)
    out = np.where(s <= 1.0, s, 1.0 + (s ** p - 1.0) / p)
    return np.sign(t) * out


def growth_weight(A, B, p: float) -> np.ndarray:
    """c_p(z, z') = max{1, |z|, |z'|}^(p-1) for all pairs of rows."""
    na = np.linalg.norm(np.asarray(A, dtype=float), axis=1)
    nb = np.linalg.norm(np.asarray(B, dtype=float), axis=1)
    return np.maximum(1.0, np.maximum(na[:, None], nb[None, :])) ** (p - 1.0)


def _line_potential_gap(a, wa, b, wb) -> float:
    """|int psi dP - int psi dQ| for the optimal 1-Lipschitz potential on the line."""
    pts = np.concatenate([a, b])
    order = np.argsort(pts, kind="mergesort")
    pts_s = pts[order]
    diff = np.cumsum(np.concatenate([wa, -wb])[order])[:-1]
    slope = np.sign(diff)
    # psi' = -sign(F_P - F_Q) between consecutive breakpoints
    psi = np.concatenate([[0.0], np.cumsum(-slope * np.diff(pts_s))])
    vals = np.empty_like(psi)
    vals[order] = psi
    return abs(float(wa @ vals[: a.size] - wb @ vals[a.size:]))


def _lower_bound(P: DiscreteDistribution, Q: DiscreteDistribution, p: float, C_euc: np.ndarray,
                 euclid_plan: TransportPlan) -> float:
    best = 0.0
    for k in range(P.dim):
        hp = growth_transform(P.atoms[:, k], p)
        hq = growth_transform(Q.atoms[:, k], p)
        best = max(best, abs(P.expect(hp) - Q.expect(hq)))
        best = max(best, _line_potential_gap(hp, P.weights, hq, Q.weights))
    rp = growth_transform(np.linalg.norm(P.atoms, axis=1), p)
    rq = growth_transform(np.linalg.norm(Q.atoms, axis=1), p)
    best = max(best, abs(P.expect(rp) - Q.expect(rq)))
    # distance to the other support
    best = max(best, P.expect(C_euc.min(axis=1)), Q.expect(C_euc.min(axis=0)))
    # clipped radial functions min(|z - c|, r) centred at every atom
    centers = np.vstack([P.atoms, Q.atoms])
    to_p = _pairwise_rows(centers, P.atoms)
    to_q = _pairwise_rows(centers, Q.atoms)
    med = float(np.median(C_euc))
    for r in (0.5 * med, med, np.inf):
        gaps = np.abs(np.minimum(to_p, r) @ P.weights - np.minimum(to_q, r) @ Q.weights)
        best = max(best, float(gaps.max()))
    # 1-Lipschitz envelope of the Kantorovich dual: psi(z) = min_j (|z - q_j| - v_j)
    v = euclid_plan.col_dual
    psi_p = (C_euc - v[None, :]).min(axis=1)
    psi_q = (_pairwise_rows(Q.atoms, Q.atoms) - v[None, :]).min(axis=1)
    best = max(best, abs(P.expect(psi_p) - Q.expect(psi_q)))
    return float(best)


def zeta_p(P: DiscreteDistribution, Q: DiscreteDistribution, p: float = 1.0) -> ZetaEstimate:
    """p-th order Fortet-Mourier distance.

    Exact on the line (push both measures through :func:`growth_transform`
    and take W1) and when every atom lies in the closed unit ball (where the
    growth weight is identically one). Upper bounds come from optimal
    transport with cost c_p |z - z'| and from the product coupling; the
    lower bound is the best of a fixed family of admissible test functions.
    """
    if p < 1:
        raise ValueError("order p must be >= 1")
    P, Q = _canonical(P, Q)
    C_euc = _pairwise(P, Q)
    W = growth_weight(P.atoms, Q.atoms, p)
    C_p = W * C_euc
    upper_product = float(P.weights @ C_p @ Q.weights)
    upper_ot = discrete_ot(C_p, P.weights, Q.weights).value

    euclid_plan = discrete_ot(C_euc, P.weights, Q.weights)
    in_ball = (np.linalg.norm(P.atoms, axis=1).max() <= 1.0
               and np.linalg.norm(Q.atoms, axis=1).max() <= 1.0)
    exact = None
    if P.dim == 1:
        exact = _w1_line(growth_transform(P.atoms[:, 0], p), P.weights,
                         growth_transform(Q.atoms[:, 0], p), Q.weights)
    elif in_ball or p == 1.0:
        exact = euclid_plan.value
    lower = _lower_bound(P, Q, p, C_euc, euclid_plan)
    return ZetaEstimate(exact, upper_ot, upper_product, lower)


def kantorovich(P: DiscreteDistribution, Q: DiscreteDistribution) -> float:
    """W1 with Euclidean ground cost (scalar laws use the CDF formula)."""
    if P.dim == 1 and Q.dim == 1:
        return wasserstein1_1d(P, Q)
    P, Q = _canonical(P, Q)
    return discrete_ot(_pairwise(P, Q), P.weights, Q.weights).value
