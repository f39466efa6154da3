"""Finite-support probability measures on Z = X x Y.

Atoms are stored as rows ``z = (x_0, ..., x_{d-1}, y)``; the last coordinate
is the output. A scalar law (e.g. the law of an estimator) is a distribution
with a single column and ``input_dim == 0``.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass

import numpy as np

from .losses import GaugeSpec, gauge_values

log = logging.getLogger(__name__)

PERTURB_MODES = ("shift_y", "shift_x", "quantize")
_MASK64 = (1 << 64) - 1


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based generator keyed by (seed, stream).

    Philox keeps the draw index in its counter, so replication ``j`` of an
    experiment can be reproduced without generating replications ``0..j-1``.
    """
    return np.random.Generator(np.random.Philox(key=[int(seed) & _MASK64, int(stream) & _MASK64]))


@dataclass(frozen=True, eq=False)
class DiscreteDistribution:
    atoms: np.ndarray
    weights: np.ndarray

    def __init__(self, atoms, weights=None):
        a = np.asarray(atoms, dtype=float)
        if a.ndim == 1:
            a = a.reshape(-1, 1)
        if a.ndim != 2 or a.shape[0] == 0:
            raise ValueError("atoms must be a nonempty 2-D array")
        if not np.all(np.isfinite(a)):
            raise ValueError("atoms must be finite")
        if weights is None:
            w = np.full(a.shape[0], 1.0 / a.shape[0])
        else:
            w = np.asarray(weights, dtype=float).ravel()
            if w.shape[0] != a.shape[0]:
                raise ValueError("one weight per atom required")
            if not np.all(w > 0) or not np.all(np.isfinite(w)):
                raise ValueError("weights must be positive and finite")
            w = w / w.sum()
        a = a.copy()
        a.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "atoms", a)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_xy(cls, X, y, weights=None) -> "DiscreteDistribution":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float).ravel()
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        return cls(np.column_stack([X, y]), weights)

    @property
    def size(self) -> int:
        return self.atoms.shape[0]

    @property
    def dim(self) -> int:
        return self.atoms.shape[1]

    @property
    def input_dim(self) -> int:
        return self.dim - 1

    @property
    def x(self) -> np.ndarray:
        return self.atoms[:, :-1]

    @property
    def y(self) -> np.ndarray:
        return self.atoms[:, -1]

    @property
    def values(self) -> np.ndarray:
        """Atoms of a scalar law as a flat array."""
        if self.dim != 1:
            raise ValueError("not a scalar distribution")
        return self.atoms[:, 0]

    def expect(self, values) -> float:
        """Integral of a function given by its values at the atoms."""
        return float(np.dot(self.weights, np.asarray(values, dtype=float)))

    def same_measure(self, other: "DiscreteDistribution", tol: float = 1e-12) -> bool:
        a, b = self.compressed(), other.compressed()
        return (a.size == b.size and a.dim == b.dim and np.array_equal(a.atoms, b.atoms)
                and np.allclose(a.weights, b.weights, rtol=0, atol=tol))

    def compressed(self) -> "DiscreteDistribution":
        """Merge repeated atoms; atoms come back in lexicographic order."""
        uniq, inv = np.unique(self.atoms, axis=0, return_inverse=True)
        w = np.bincount(inv.ravel(), weights=self.weights, minlength=uniq.shape[0])
        return DiscreteDistribution(uniq, w)

    def __repr__(self):
        return f"DiscreteDistribution(size={self.size}, dim={self.dim})"


def sample_indices(dist: DiscreteDistribution, n: int, seed: int, stream: int = 0) -> np.ndarray:
    if n < 1:
        raise ValueError("sample size must be >= 1")
    rng = make_rng(seed, stream)
    cdf = np.cumsum(dist.weights)
    cdf[-1] = 1.0
    return np.searchsorted(cdf, rng.random(n), side="right")


def sample(dist: DiscreteDistribution, n: int, seed: int, stream: int = 0) -> np.ndarray:
    """n i.i.d. draws; rows are points ``(x, y)``."""
    return dist.atoms[sample_indices(dist, n, seed, stream)]


def empirical(samples) -> DiscreteDistribution:
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise ValueError("empty sample")
    return DiscreteDistribution(samples)


def empirical_from_indices(dist: DiscreteDistribution, idx) -> DiscreteDistribution:
    """Empirical measure of ``dist.atoms[idx]`` with repeated atoms merged.

    Equal as a measure to ``empirical(dist.atoms[idx])`` but stored with at
    most ``dist.size`` atoms.
    """
    idx = np.asarray(idx)
    if idx.size == 0:
        raise ValueError("empty sample")
    counts = np.bincount(idx, minlength=dist.size)
    keep = np.nonzero(counts)[0]
    return DiscreteDistribution(dist.atoms[keep], counts[keep] / idx.size)


def moment(dist: DiscreteDistribution, g: GaugeSpec, power: float = 1.0) -> float:
    if power < 1:
        raise ValueError("power must be >= 1")
    phi = gauge_values(g, dist.x, dist.y)
    return dist.expect(phi ** power)


def membership(dist: DiscreteDistribution, g: GaugeSpec, power: float, kappa: float) -> bool:
    return moment(dist, g, power) <= kappa


def mix(P: DiscreteDistribution, H: DiscreteDistribution, t: float) -> DiscreteDistribution:
    """(1 - t) P + t H, keeping both atom lists (minus any weight that underflows to 0)."""
    if not 0.0 <= t <= 1.0:
        raise ValueError("t must lie in [0, 1]")
    if P.dim != H.dim:
        raise ValueError("dimension mismatch")
    if t == 0.0:
        return P
    if t == 1.0:
        return H
    atoms = np.vstack([P.atoms, H.atoms])
    w = np.concatenate([(1.0 - t) * P.weights, t * H.weights])
    keep = w > 0  # t * w can underflow for subnormal t
    return DiscreteDistribution(atoms[keep], w[keep])


def perturb(P: DiscreteDistribution, mode: str, magnitude: float, seed: int = 0) -> DiscreteDistribution:
    """Displace atoms by bounded noise; weights are kept.

    ``shift_y`` moves each output by +-magnitude (random sign), ``shift_x``
    moves each input by magnitude along a random unit direction, and
    ``quantize`` truncates outputs toward zero onto a grid of step magnitude.
    """
    if mode not in PERTURB_MODES:
        raise ValueError(f"unknown perturbation mode {mode!r}")
    if magnitude < 0:
        raise ValueError("magnitude must be nonnegative")
    if magnitude == 0:
        return P
    atoms = np.array(P.atoms)
    rng = make_rng(seed, 0x5EED)
    if mode == "shift_y":
        atoms[:, -1] += magnitude * rng.choice([-1.0, 1.0], size=P.size)
    elif mode == "shift_x":
        if P.input_dim < 1:
            raise ValueError("shift_x needs inputs")
        u = rng.standard_normal((P.size, P.input_dim))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        atoms[:, :-1] += magnitude * u
    else:
        with np.errstate(over="ignore"):
            q = np.trunc(atoms[:, -1] / magnitude)
        # a step below float resolution leaves the value on the grid already
        atoms[:, -1] = np.where(np.isfinite(q), magnitude * q, atoms[:, -1])
    return DiscreteDistribution(atoms, P.weights)


def load_csv(path) -> DiscreteDistribution:
    """Read ``x_0,...,x_{d-1},y,weight``; weights are renormalised."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader)]
        if len(header) < 2 or header[-2:] != ["y", "weight"]:
            raise ValueError(f"{path}: header must end with 'y,weight', got {header}")
        expected = [f"x_{i}" for i in range(len(header) - 2)]
        if header[:-2] != expected:
            raise ValueError(f"{path}: input columns must be named {expected}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ValueError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                rows.append([float(c) for c in row])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise ValueError(f"{path}: no atoms")
    arr = np.array(rows)
    w = arr[:, -1]
    total = w.sum()
    if abs(total - 1.0) > 1e-9:
        log.warning("%s: weights sum to %.17g, renormalising", path, total)
    return DiscreteDistribution(arr[:, :-1], w)


def save_csv(dist: DiscreteDistribution, path) -> None:
    d = dist.input_dim
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow([f"x_{i}" for i in range(d)] + ["y", "weight"])
        for z, w in zip(dist.atoms, dist.weights):
            wr.writerow([format(float(v), ".17g") for v in z] + [format(float(w), ".17g")])
