"""Cost functions c(z, f(x)) written through the residual t = y - f(x)."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .kernels import KernelSpec, diagonal

LOSS_FAMILIES = ("squared", "eps_insensitive", "hinge", "log_loss", "zero_one")
CONVEX_LOSSES = frozenset({"squared", "eps_insensitive", "hinge", "log_loss"})


class UnsupportedLoss(ValueError):
    """The requested operation is undefined for this loss."""


class UnsupportedCombination(ValueError):
    """No Lipschitz profile is known for this (loss, kernel) pair."""


@dataclass(frozen=True)
class LossSpec:
    family: str
    epsilon: float = 0.0

    def __post_init__(self):
        if self.family not in LOSS_FAMILIES:
            raise ValueError(f"unknown loss family {self.family!r}")
        if not self.epsilon >= 0:
            raise ValueError("epsilon must be nonnegative")

    @property
    def is_convex(self) -> bool:
        return self.family in CONVEX_LOSSES

    @property
    def is_smooth(self) -> bool:
        return self.family in ("squared", "log_loss")


@dataclass(frozen=True)
class GaugeSpec:
    """Gauge phi dominating the loss over the RKHS ball of radius ``beta``."""

    loss: LossSpec
    kernel: KernelSpec
    beta: float

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")


@dataclass(frozen=True)
class LipschitzProfile:
    """|c(z,f(x)) - c(z',f(x'))| <= constant * max{1,|z|,|z'|}^(order-1) * |z - z'|.

    ``constant`` is the closed-form value used by the robustness bound.
    ``certified_constant``, when present, is a value that provably holds in
    the Euclidean norm on Z for every f in the ball; ``None`` means no such
    closed form is provided for this pair.
    """

    order: float
    constant: float
    note: str = ""
    certified_constant: Optional[float] = None

    def __post_init__(self):
        if self.order < 1:
            raise ValueError("order must be >= 1")
        if not self.constant > 0:
            raise ValueError("constant must be positive")


def _check_finite(*vals):
    for v in vals:
        if not np.all(np.isfinite(v)):
            raise ValueError("non-finite input")


def loss_values(loss: LossSpec, y, fx) -> np.ndarray:
    """Vectorised loss over arrays of targets and predictions."""
    y = np.asarray(y, dtype=float)
    fx = np.asarray(fx, dtype=float)
    t = y - fx
    fam = loss.family
    if fam == "squared":
        return 0.5 * t * t
    if fam == "eps_insensitive":
        return np.maximum(0.0, np.abs(t) - loss.epsilon)
    if fam == "hinge":
        return np.maximum(0.0, 1.0 - t)
    if fam == "log_loss":
        return np.logaddexp(0.0, -t)
    return (np.where(fx >= 0.5, 1.0, 0.0) != y).astype(float)


def loss_eval(loss: LossSpec, y: float, fx: float) -> float:
    """c(z, f(x)); zero_one thresholds the prediction at 1/2 for labels in {0, 1}."""
    _check_finite(y, fx)
    return float(loss_values(loss, y, fx))


def loss_subgradients(loss: LossSpec, y, fx) -> np.ndarray:
    """Derivative in ``fx``; midpoint of the subdifferential at kinks."""
    fam = loss.family
    if fam == "zero_one":
        raise UnsupportedLoss("zero_one loss has no useful subgradient")
    y = np.asarray(y, dtype=float)
    fx = np.asarray(fx, dtype=float)
    t = y - fx
    if fam == "squared":
        return -t
    if fam == "hinge":
        return np.where(t < 1.0, 1.0, np.where(t > 1.0, 0.0, 0.5))
    if fam == "log_loss":
        # d/dfx log(1 + e^{-t}) = 1 / (1 + e^{t})
        return 0.5 * (1.0 - np.tanh(0.5 * t))
    r = np.abs(t) - loss.epsilon
    sgn = -np.sign(t)
    if loss.epsilon == 0:
        return sgn
    return np.where(r > 0, sgn, np.where(r < 0, 0.0, 0.5 * sgn))


def loss_subgradient(loss: LossSpec, y: float, fx: float) -> float:
    _check_finite(y, fx)
    return float(loss_subgradients(loss, y, fx))


def gauge_values(g: GaugeSpec, X, y) -> np.ndarray:
    """phi(z) for each row (x_i, y_i).

    Squared loss: |y|^2 + beta^2 k(x, x), from 0.5 (y - f)^2 <= y^2 + f^2 and
    |f(x)| <= beta sqrt(k(x, x)). Residual-Lipschitz losses: 1 + |y| + beta sqrt(k(x, x)).
    """
    y = np.asarray(y, dtype=float).ravel()
    kxx = np.maximum(diagonal(g.kernel, X), 0.0)
    if g.loss.family == "squared":
        return y * y + g.beta ** 2 * kxx
    return 1.0 + np.abs(y) + g.beta * np.sqrt(kxx)


def gauge_phi(g: GaugeSpec, z) -> float:
    """phi at a single point ``z = (x, y)``."""
    x, y = z
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return float(gauge_values(g, x[None, :], [y])[0])


def lipschitz_profile(loss: LossSpec, kernel: KernelSpec, beta: float) -> LipschitzProfile:
    """Local Lipschitz order and constant of the squared loss over the ball.

    Only the squared loss is supported, with linear, Gaussian and polynomial
    kernels; other pairs raise :class:`UnsupportedCombination`.
    """
    if loss.family != "squared" or kernel.family not in ("linear", "gaussian", "polynomial"):
        raise UnsupportedCombination(f"no Lipschitz profile for ({loss.family}, {kernel.family})")
    if kernel.family == "linear":
        return LipschitzProfile(2.0, max(1.0, beta) ** 2, certified_constant=1.0 + beta ** 2)
    gam = kernel.gamma
    if kernel.family == "gaussian":
        rate = max(math.sqrt(2.0 * gam), 1.0)
        return LipschitzProfile(2.0, rate,
                                certified_constant=(1.0 + beta) * math.sqrt(1.0 + (beta * rate) ** 2))
    d = int(kernel.degree)
    lead = 1.0 + beta * (gam + 1.0) ** (d / 2.0)
    half = ((1.0 + gam) / 2.0) ** (d / 2.0)
    if d % 2 == 0:
        return LipschitzProfile(2.0 * d, lead * max(beta * half, beta, 1.0), note="d even")
    return LipschitzProfile(3.0 * d + 1.0,
                            lead * max(2.0 * beta * half, 4.0 * beta, 4.0 * beta * gam ** d, 1.0),
                            note="d odd")
