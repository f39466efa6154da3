"""Regularised empirical risk minimisation over an RKHS ball.

The hypothesis class is the span of kernel sections at the distinct inputs
of the (finite) training measure; the optimum over the whole RKHS lies in
that span. Objective::

    sum_i w_i c(y_i, f(x_i)) + lam * ||f||_k^2     subject to ||f||_k <= beta
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError
from scipy.optimize import brentq

from .distributions import DiscreteDistribution, make_rng
from .kernels import KernelSpec, cross_kernel, gram_matrix, rkhs_norm
from .losses import LossSpec, UnsupportedLoss, loss_subgradients, loss_values

DEFAULT_BETA = 10.0
RESTART_SEEDS = (0, 1, 2)


class IllConditioned(ArithmeticError):
    """Unregularised problem with a singular Gram matrix and an inactive ball."""


@dataclass(frozen=True)
class ErmConfig:
    kernel: KernelSpec
    loss: LossSpec
    lam: float
    beta: float = DEFAULT_BETA
    grad_tol: float = 1e-10
    max_iter: int = 20000

    def __post_init__(self):
        if not self.lam >= 0:
            raise ValueError("lambda must be nonnegative")
        if not self.beta >= 0:
            raise ValueError("beta must be nonnegative")
        if self.lam == 0 and math.isinf(self.beta):
            raise ValueError("lambda = 0 needs a finite ball radius")

    def with_lambda(self, lam: float) -> "ErmConfig":
        return ErmConfig(self.kernel, self.loss, lam, self.beta, self.grad_tol, self.max_iter)


@dataclass(frozen=True)
class ErmSolution:
    anchors: np.ndarray
    coefficients: np.ndarray
    rkhs_norm: float
    objective: float
    risk_term: float
    reg_term: float
    iterations: int = 0
    grad_norm: float = 0.0
    converged: bool = True
    multiplier: float = 0.0  # Lagrange multiplier of the ball constraint
    lam: float = 0.0

    def predict(self, kernel: KernelSpec, X) -> np.ndarray:
        if self.coefficients.size == 0:
            return np.zeros(np.asarray(X).shape[0])
        return cross_kernel(kernel, X, self.anchors) @ self.coefficients


@dataclass
class _Problem:
    """Training measure folded onto its distinct inputs."""

    anchors: np.ndarray
    index: np.ndarray  # atom -> anchor
    w: np.ndarray  # atom weights
    y: np.ndarray  # atom outputs
    K: np.ndarray
    W: np.ndarray = field(init=False)  # anchor weights
    ybar: np.ndarray = field(init=False)  # weighted mean output per anchor

    def __post_init__(self):
        n = self.anchors.shape[0]
        self.W = np.bincount(self.index, weights=self.w, minlength=n)
        self.ybar = np.bincount(self.index, weights=self.w * self.y, minlength=n) / self.W


def _fold(dist: DiscreteDistribution, kernel: KernelSpec) -> _Problem:
    if dist.input_dim != kernel.input_dim:
        raise ValueError(f"data has {dist.input_dim} inputs, kernel expects {kernel.input_dim}")
    if not kernel.is_pds:
        raise ValueError(f"{kernel.family} kernel is evaluation-only")
    anchors, inv = np.unique(dist.x, axis=0, return_inverse=True)
    inv = inv.ravel()
    return _Problem(anchors, inv, dist.weights, dist.y, gram_matrix(kernel, anchors))


def _finish(prob: _Problem, kernel: KernelSpec, loss: LossSpec, lam: float, alpha: np.ndarray,
            **diag) -> ErmSolution:
    norm = rkhs_norm(kernel, prob.anchors, alpha)
    fx = (prob.K @ alpha)[prob.index]
    risk = float(prob.w @ loss_values(loss, prob.y, fx))
    reg = lam * norm * norm
    return ErmSolution(prob.anchors, alpha, norm, risk + reg, risk, reg, lam=lam, **diag)


def _penalised_alpha(prob: _Problem, pen: float) -> np.ndarray:
    """Solve (K + 2 pen W^-1) alpha = ybar by Cholesky, jittering on failure."""
    M = prob.K + np.diag(2.0 * pen / prob.W)
    try:
        c = cho_factor(M, lower=True)
    except LinAlgError:
        jitter = 1e-10 * max(float(np.trace(prob.K)), 1e-300)
        c = cho_factor(M + jitter * np.eye(M.shape[0]), lower=True)
    alpha = cho_solve(c, prob.ybar)
    # one step of iterative refinement against the unjittered system
    return alpha + cho_solve(c, prob.ybar - M @ alpha)


def _knorm(prob: _Problem, alpha: np.ndarray) -> float:
    return math.sqrt(max(float(alpha @ prob.K @ alpha), 0.0))


def solve_ridge(dist: DiscreteDistribution, cfg: ErmConfig) -> ErmSolution:
    """Closed-form minimiser for the squared loss.

    Stationarity gives (K + 2 lam W^-1) alpha = ybar on the distinct inputs.
    When that solution leaves the ball, the constrained optimum is the same
    system with lam replaced by lam + mu, mu > 0 chosen so ||f||_k = beta.
    """
    if cfg.loss.family != "squared":
        raise UnsupportedLoss("solve_ridge handles the squared loss only")
    prob = _fold(dist, cfg.kernel)
    n = prob.anchors.shape[0]
    if cfg.beta == 0:
        return _finish(prob, cfg.kernel, cfg.loss, cfg.lam, np.zeros(n))

    if cfg.lam > 0:
        alpha = _penalised_alpha(prob, cfg.lam)
    else:
        ev = np.linalg.eigvalsh(prob.K)
        try:
            # Cholesky can succeed on a numerically singular matrix; check first
            if ev[0] <= n * np.finfo(float).eps * max(ev[-1], 0.0):
                raise LinAlgError("numerically singular Gram matrix")
            alpha = cho_solve(cho_factor(prob.K, lower=True), prob.ybar)
        except LinAlgError:
            alpha = None
            tiny = 1e-10 * max(float(np.trace(prob.K)), 1e-300) * prob.W.min()
            if _knorm(prob, _penalised_alpha(prob, tiny)) <= cfg.beta:
                raise IllConditioned("singular Gram matrix with lambda = 0") from None

    mu = 0.0
    if alpha is None or _knorm(prob, alpha) > cfg.beta:
        def gap(m):
            return _knorm(prob, _penalised_alpha(prob, cfg.lam + m)) - cfg.beta

        hi = 1.0
        while gap(hi) > 0:
            hi *= 4.0
        lo = 0.0 if cfg.lam > 0 else hi
        if cfg.lam == 0:
            for _ in range(200):
                if gap(lo) > 0:
                    break
                lo /= 4.0
        mu = brentq(gap, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
        alpha = _penalised_alpha(prob, cfg.lam + mu)
        # the root may land a hair outside the ball; pull it back radially
        nrm = _knorm(prob, alpha)
        if nrm > cfg.beta:
            alpha = alpha * (cfg.beta / nrm)

    grad = _alpha_gradient(prob, alpha, cfg.lam + mu)
    return _finish(prob, cfg.kernel, cfg.loss, cfg.lam, alpha,
                   grad_norm=float(np.linalg.norm(grad)), multiplier=mu)


def _alpha_gradient(prob: _Problem, alpha: np.ndarray, pen: float) -> np.ndarray:
    """Gradient in alpha of the squared-loss objective with penalty ``pen``."""
    return prob.K @ (prob.W * (prob.K @ alpha - prob.ybar) + 2.0 * pen * alpha)


def stationarity_residual(dist: DiscreteDistribution, cfg: ErmConfig, sol: ErmSolution) -> float:
    """Norm of the Lagrangian gradient in alpha (squared loss).

    Recomputed from scratch on the folded data, independently of the solver.
    """
    prob = _fold(dist, cfg.kernel)
    if not np.array_equal(prob.anchors, sol.anchors):
        raise ValueError("solution anchors do not match the data")
    return float(np.linalg.norm(_alpha_gradient(prob, sol.coefficients, cfg.lam + sol.multiplier)))


class _Whitened:
    """f(anchor_a) = (B u)_a with ||f||_k = |u|, from K = U diag(s) U^T."""

    def __init__(self, prob: _Problem):
        s, U = np.linalg.eigh(prob.K)
        keep = s > max(s.max(), 0.0) * s.size * np.finfo(float).eps
        self.U = U[:, keep]
        self.root = np.sqrt(s[keep])
        self.B = self.U * self.root

    def alpha(self, u: np.ndarray) -> np.ndarray:
        return self.U @ (u / self.root)


def _project(u: np.ndarray, beta: float) -> np.ndarray:
    nrm = float(np.linalg.norm(u))
    return u if nrm <= beta else u * (beta / nrm)


def solve_convex(dist: DiscreteDistribution, cfg: ErmConfig) -> ErmSolution:
    """Projected first-order method for any convex loss.

    Works in whitened coordinates u (||f||_k = |u|), where the ball
    projection is a radial rescaling. Smooth losses use accelerated
    projected gradient with adaptive restart; nonsmooth losses use projected
    subgradient steps c / sqrt(t) with c set by a backtracking warm-up.
    Deterministic restarts from seeds 0, 1, 2; the best objective wins.
    """
    loss = cfg.loss
    if not loss.is_convex:
        raise UnsupportedLoss(f"{loss.family} loss is not convex")
    prob = _fold(dist, cfg.kernel)
    n = prob.anchors.shape[0]
    if cfg.beta == 0:
        return _finish(prob, cfg.kernel, loss, cfg.lam, np.zeros(n), iterations=0)

    wh = _Whitened(prob)
    Ba = wh.B[prob.index]  # rows for atoms
    w, y, lam, beta = prob.w, prob.y, cfg.lam, cfg.beta

    def objective(u):
        return float(w @ loss_values(loss, y, Ba @ u)) + lam * float(u @ u)

    def gradient(u):
        return Ba.T @ (w * loss_subgradients(loss, y, Ba @ u)) + 2.0 * lam * u

    curvature = 1.0 if loss.family == "squared" else 0.25
    lip = curvature * float(np.linalg.eigvalsh((Ba.T * w) @ Ba).max(initial=0.0)) + 2.0 * lam

    best_u, best_val, best_it, best_g, ok = None, math.inf, 0, math.inf, False
    for seed in RESTART_SEEDS:
        if seed == 0:
            u0 = np.zeros(wh.B.shape[1])
        else:
            u0 = make_rng(seed, 0xE57).standard_normal(wh.B.shape[1])
            u0 = _project(u0, 0.5 * beta if math.isfinite(beta) else 1.0)
        if loss.is_smooth:
            u, it, g, conv = _accelerated(objective, gradient, u0, lip, beta, cfg.grad_tol, cfg.max_iter)
        else:
            u, it, g, conv = _subgradient(objective, gradient, u0, beta, cfg.max_iter)
        val = objective(u)
        if val < best_val:
            best_u, best_val, best_it, best_g, ok = u, val, it, g, conv
    return _finish(prob, cfg.kernel, loss, lam, wh.alpha(best_u),
                   iterations=best_it, grad_norm=best_g, converged=ok)


def _accelerated(objective, gradient, u0, lip, beta, tol, max_iter):
    step = 1.0 / max(lip, 1e-300)
    u = _project(u0, beta)
    v, t = u.copy(), 1.0
    gmap = math.inf
    for it in range(1, max_iter + 1):
        u_new = _project(v - step * gradient(v), beta)
        gmap = float(np.linalg.norm(u_new - v)) / step
        if gmap <= tol:
            return u_new, it, gmap, True
        if float((v - u_new) @ (u_new - u)) > 0:  # gradient-based momentum restart
            u, v, t = u_new, u_new.copy(), 1.0
            continue
        t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        v = u_new + ((t - 1.0) / t_new) * (u_new - u)
        u, t = u_new, t_new
    return u, max_iter, gmap, False


def _subgradient(objective, gradient, u0, beta, max_iter):
    u = _project(u0, beta)
    g = gradient(u)
    gn = float(np.linalg.norm(g))
    if gn == 0.0:
        return u, 0, 0.0, True
    # backtracking warm-up: largest c = 2^-k whose first step decreases the objective
    f0 = objective(u)
    c = 1.0
    for _ in range(40):
        if objective(_project(u - c * g / gn, beta)) < f0:
            break
        c *= 0.5
    best_u, best_f = u, f0
    for it in range(1, max_iter + 1):
        g = gradient(u)
        gn = float(np.linalg.norm(g))
        if gn == 0.0:
            return u, it, 0.0, True
        u = _project(u - (c / math.sqrt(it)) * g / gn, beta)
        f = objective(u)
        if f < best_f:
            best_u, best_f = u, f
    return best_u, max_iter, gn, False


def optimal_value(dist: DiscreteDistribution, cfg: ErmConfig) -> float:
    """Regularised optimal value; with lam = 0 the ball-constrained optimal risk."""
    return solve(dist, cfg).objective


def solve(dist: DiscreteDistribution, cfg: ErmConfig) -> ErmSolution:
    if cfg.loss.family == "squared":
        return solve_ridge(dist, cfg)
    return solve_convex(dist, cfg)


def risk_true(dist: DiscreteDistribution, sol: ErmSolution, loss: LossSpec, kernel: KernelSpec) -> float:
    """sum_i w_i c(z_i, f(x_i)) without the penalty."""
    fx = sol.predict(kernel, dist.x)
    return float(dist.weights @ loss_values(loss, dist.y, fx))


def solution_distance(a: ErmSolution, b: ErmSolution, kernel: KernelSpec) -> float:
    """||f_a - f_b||_k over the joint anchor set.

    Coefficients of shared anchors are merged first, so identical expansions
    give exactly zero and swapping the arguments gives the same bits.
    """
    anchors = np.vstack([a.anchors, b.anchors])
    if anchors.shape[0] == 0:
        return 0.0
    uniq, inv = np.unique(anchors, axis=0, return_inverse=True)
    coef = np.zeros(uniq.shape[0])
    np.add.at(coef, inv.ravel(), np.concatenate([a.coefficients, -b.coefficients]))
    return rkhs_norm(kernel, uniq, coef)
