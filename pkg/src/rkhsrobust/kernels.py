"""Kernel families, Gram matrices and finite RKHS expansions.

Distances inside the kernels use the Euclidean norm, except the Laplacian
kernel which uses the 1-norm in its exponent. Growth functions are always
evaluated at the Euclidean distance between inputs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

FAMILIES = ("linear", "gaussian", "laplacian", "polynomial", "sigmoid")
PDS_FAMILIES = frozenset({"linear", "gaussian", "laplacian", "polynomial"})


class RejectedInput(ValueError):
    """Input arrays do not match the declared shapes."""


class InternalConsistencyError(ArithmeticError):
    """A quantity that must be nonnegative came out materially negative."""


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family plus its parameters.

    ``gamma`` scales every family except ``linear``; ``degree`` is only read by
    ``polynomial`` and ``a``/``b`` only by ``sigmoid``. The sigmoid kernel is
    not positive definite in general, so it is evaluation-only.
    """

    family: str
    gamma: float = 1.0
    degree: int = 2
    a: float = 1.0
    b: float = 1.0
    input_dim: int = 1

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise RejectedInput(f"unknown kernel family {self.family!r}")
        if not self.gamma > 0:
            raise RejectedInput("gamma must be positive")
        if int(self.degree) != self.degree or self.degree < 1:
            raise RejectedInput("degree must be a positive integer")
        if self.family == "sigmoid" and not (self.a > 0 and self.b > 0):
            raise RejectedInput("sigmoid kernel needs a, b > 0")
        if int(self.input_dim) != self.input_dim or self.input_dim < 1:
            raise RejectedInput("input_dim must be a positive integer")

    @property
    def is_pds(self) -> bool:
        return self.family in PDS_FAMILIES


@dataclass(frozen=True)
class GrowthProfile:
    """Shape of the calmness growth function g.

    ``kind`` is one of ``linear_rate`` (g(t) = rate * t), ``sqrt_rate``,
    ``piecewise`` (Laplacian: sqrt branch then affine branch) or ``uncalm``.
    """

    kind: str
    rates: tuple = ()
    note: str = ""

    def __post_init__(self):
        if self.kind == "uncalm" and self.rates:
            raise ValueError("an uncalm profile carries no constants")
        if any(r < 0 for r in self.rates):
            raise ValueError("rate constants must be nonnegative")


def _as_points(points, dim: int) -> np.ndarray:
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1) if dim == 1 else arr.reshape(1, -1)
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise RejectedInput(f"expected points of dimension {dim}, got shape {np.shape(points)}")
    if arr.shape[0] == 0:
        raise RejectedInput("empty point list")
    return arr


def _as_vector(x, dim: int) -> np.ndarray:
    v = np.atleast_1d(np.asarray(x, dtype=float))
    if v.shape != (dim,):
        raise RejectedInput(f"expected a vector of length {dim}, got shape {v.shape}")
    return v


def cross_kernel(spec: KernelSpec, A, B) -> np.ndarray:
    """Matrix ``[k(a_i, b_j)]`` for two point sets."""
    A = _as_points(A, spec.input_dim)
    B = _as_points(B, spec.input_dim)
    fam = spec.family
    if fam == "gaussian":
        sq = ((A[:, None, :] - B[None, :, :]) ** 2).sum(axis=-1)
        return np.exp(-spec.gamma * sq)
    if fam == "laplacian":
        l1 = np.abs(A[:, None, :] - B[None, :, :]).sum(axis=-1)
        return np.exp(-spec.gamma * l1)
    inner = A @ B.T
    if fam == "linear":
        return inner
    if fam == "polynomial":
        return (spec.gamma * inner + 1.0) ** int(spec.degree)
    return np.tanh(spec.a * inner + spec.b)


def kernel_eval(spec: KernelSpec, x1, x2) -> float:
    v1 = _as_vector(x1, spec.input_dim)
    v2 = _as_vector(x2, spec.input_dim)
    fam = spec.family
    if fam == "gaussian":
        return math.exp(-spec.gamma * float(((v1 - v2) ** 2).sum()))
    if fam == "laplacian":
        return math.exp(-spec.gamma * float(np.abs(v1 - v2).sum()))
    # np.dot is not guaranteed to be bitwise symmetric; a plain sum of
    # elementwise products is, because multiplication commutes.
    inner = float((v1 * v2).sum())
    if fam == "linear":
        return inner
    if fam == "polynomial":
        return (spec.gamma * inner + 1.0) ** int(spec.degree)
    return math.tanh(spec.a * inner + spec.b)


def gram_matrix(spec: KernelSpec, points) -> np.ndarray:
    """Symmetric Gram matrix of ``points``; exact symmetry is enforced."""
    P = _as_points(points, spec.input_dim)
    K = cross_kernel(spec, P, P)
    return 0.5 * (K + K.T)


def polynomial_calm_rate(gamma: float, degree: int, radius: float) -> float:
    """Lipschitz constant of the polynomial feature map on the ball of ``radius``.

    sup over the ball of the operator norm of the mixed second derivative of k:
    d*gamma*(gamma R^2 + 1)^(d-2) * (d*gamma*R^2 + 1).
    """
    d = int(degree)
    s = gamma * radius * radius
    return math.sqrt(d * gamma * (s + 1.0) ** (d - 2) * (d * s + 1.0))


def growth_profile(spec: KernelSpec, domain_radius: Optional[float] = None) -> GrowthProfile:
    fam = spec.family
    if fam == "linear":
        return GrowthProfile("linear_rate", (1.0,))
    if fam == "gaussian":
        return GrowthProfile("linear_rate", (max(math.sqrt(2.0 * spec.gamma), 1.0),))
    if fam == "laplacian":
        c = spec.gamma * math.sqrt(spec.input_dim)
        return GrowthProfile(
            "piecewise", (2.0 * c, c / 2.0),
            note="sqrt(rates[0] * t) for t <= rates[1], t + rates[1] beyond",
        )
    if fam == "polynomial":
        if spec.degree == 1:
            return GrowthProfile("linear_rate", (max(math.sqrt(spec.gamma), 1.0),))
        if domain_radius is None:
            return GrowthProfile("uncalm", note="superlinear growth on an unbounded domain")
        if not domain_radius > 0:
            raise RejectedInput("domain_radius must be positive")
        rate = polynomial_calm_rate(spec.gamma, spec.degree, domain_radius)
        return GrowthProfile("linear_rate", (max(rate, 1.0),),
                             note=f"valid for |x| <= {domain_radius}")
    return GrowthProfile("uncalm", note="sigmoid kernel is evaluation-only")


def growth_function(spec: KernelSpec, t: float, domain_radius: Optional[float] = None) -> float:
    """Calmness growth g(t); returns ``math.inf`` for an uncalm kernel."""
    if t < 0:
        raise RejectedInput("t must be nonnegative")
    prof = growth_profile(spec, domain_radius)
    if prof.kind == "uncalm":
        return math.inf
    if prof.kind == "linear_rate":
        return prof.rates[0] * t
    two_c, half_c = prof.rates
    if t <= half_c:
        return math.sqrt(two_c * t)
    return t + half_c


def _quadratic_form(K: np.ndarray, coef: np.ndarray, is_pds: bool) -> float:
    q = float(coef @ K @ coef)
    if q >= 0:
        return q
    scale = float(coef @ coef) * abs(float(np.trace(K)))
    if q >= -1e-10 * scale - 1e-12 or not is_pds:
        return 0.0
    raise InternalConsistencyError(f"negative RKHS quadratic form {q:.3e}")


def rkhs_norm(spec: KernelSpec, anchors, coefficients) -> float:
    """sqrt(alpha^T K alpha) for f = sum_j alpha_j k(x_j, .)."""
    coef = np.asarray(coefficients, dtype=float).ravel()
    if coef.size == 0:
        return 0.0
    P = _as_points(anchors, spec.input_dim)
    if P.shape[0] != coef.size:
        raise RejectedInput("anchors and coefficients differ in length")
    return math.sqrt(_quadratic_form(gram_matrix(spec, P), coef, spec.is_pds))


def function_eval(spec: KernelSpec, anchors, coefficients, x) -> float:
    coef = np.asarray(coefficients, dtype=float).ravel()
    v = _as_vector(x, spec.input_dim)
    if coef.size == 0:
        return 0.0
    P = _as_points(anchors, spec.input_dim)
    if P.shape[0] != coef.size:
        raise RejectedInput("anchors and coefficients differ in length")
    return float(cross_kernel(spec, P, v[None, :])[:, 0] @ coef)


def function_values(spec: KernelSpec, anchors, coefficients, points) -> np.ndarray:
    """Vectorised :func:`function_eval` over many evaluation points."""
    coef = np.asarray(coefficients, dtype=float).ravel()
    X = _as_points(points, spec.input_dim)
    if coef.size == 0:
        return np.zeros(X.shape[0])
    return cross_kernel(spec, X, anchors) @ coef


def diagonal(spec: KernelSpec, points) -> np.ndarray:
    """k(x, x) for each row of ``points``."""
    X = _as_points(points, spec.input_dim)
    fam = spec.family
    if fam in ("gaussian", "laplacian"):
        return np.ones(X.shape[0])
    sq = (X * X).sum(axis=1)
    if fam == "linear":
        return sq
    if fam == "polynomial":
        return (spec.gamma * sq + 1.0) ** int(spec.degree)
    return np.tanh(spec.a * sq + spec.b)
