"""Experiment configuration: JSON parsing and validation."""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .distributions import DiscreteDistribution, load_csv, perturb
from .erm import DEFAULT_BETA, ErmConfig
from .kernels import KernelSpec
from .losses import LossSpec

EXPERIMENTS = ("quantitative", "qualitative", "stability", "consistency", "solution_stability")


class ConfigError(ValueError):
    """Malformed experiment configuration; the message names the field."""


@dataclass(frozen=True)
class LambdaSchedule:
    """lam_N = c * N ** exponent (exponent 0 gives a constant)."""

    c: float
    exponent: float = 0.0

    def __call__(self, n: int) -> float:
        return self.c * float(n) ** self.exponent

    def describe(self) -> str:
        if self.exponent == 0:
            return f"constant:{self.c!r}"
        return f"power:{self.c!r}*N^{self.exponent!r}"


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    experiment: str
    P: DiscreteDistribution
    erm: ErmConfig
    schedule: LambdaSchedule
    seed: int = 0
    Q: Optional[DiscreteDistribution] = None
    H: Optional[DiscreteDistribution] = None
    contamination: Optional[dict] = None
    n: int = 20
    n_grid: tuple = ()
    replications: int = 100
    p: Optional[float] = None
    t_grid: tuple = ()
    delta: float = 0.05
    epsilon: float = 0.05
    kappa: float = math.inf
    deviation: float = 0.01
    bootstrap: int = 200
    family: tuple = ()

    def __post_init__(self):
        if self.replications < 1:
            raise ConfigError("M: replications must be >= 1")
        if self.n < 1 or any(v < 1 for v in self.n_grid):
            raise ConfigError("N: sample sizes must be >= 1")
        for v in [self.n, *self.n_grid]:
            if self.schedule(v) < 0:
                raise ConfigError("lambda_schedule: lambda_N must be nonnegative")
        if any(not 0.0 <= t <= 1.0 for t in self.t_grid):
            raise ConfigError("t_grid: values must lie in [0, 1]")

    def lam(self, n: Optional[int] = None) -> float:
        return self.schedule(self.n if n is None else n)

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return replace(self, seed=int(seed))

    def echo(self) -> dict:
        """Flat parameter listing written into every report."""
        k, loss = self.erm.kernel, self.erm.loss
        out = {
            "name": self.name,
            "experiment": self.experiment,
            "seed": self.seed,
            "kernel": k.family,
            "gamma": k.gamma,
            "degree": k.degree,
            "input_dim": k.input_dim,
            "loss": loss.family,
            "epsilon_loss": loss.epsilon,
            "beta": self.erm.beta,
            "lambda_schedule": self.schedule.describe(),
            "N": self.n,
            "N_grid": " ".join(str(v) for v in self.n_grid),
            "M": self.replications,
            "P_atoms": self.P.size,
        }
        if self.contamination:
            out["contamination"] = " ".join(f"{k}={v}" for k, v in sorted(self.contamination.items()))
        return out


def _dist(spec, where: str, base_dir: str) -> DiscreteDistribution:
    if isinstance(spec, str):
        spec = {"csv": spec}
    if not isinstance(spec, dict):
        raise ConfigError(f"{where}: expected an object with 'atoms' or 'csv'")
    try:
        if "csv" in spec:
            path = spec["csv"]
            if not os.path.isabs(path):
                path = os.path.join(base_dir, path)
            return load_csv(path)
        atoms = np.asarray(spec["atoms"], dtype=float)
        return DiscreteDistribution(atoms, spec.get("weights"))
    except KeyError as exc:
        raise ConfigError(f"{where}: missing field {exc}") from None
    except (ValueError, TypeError, OSError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _num(d: dict, key: str, default=None, cast=float):
    if key not in d:
        if default is None:
            raise ConfigError(f"{key}: required field missing")
        return default
    try:
        return cast(d[key])
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected a number, got {d[key]!r}") from None


def parse_config(raw: dict, base_dir: str = ".") -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("top level: expected a JSON object")
    exp = raw.get("experiment")
    if exp not in EXPERIMENTS:
        raise ConfigError(f"experiment: expected one of {EXPERIMENTS}, got {exp!r}")
    if "ground_truth" not in raw:
        raise ConfigError("ground_truth: required field missing")
    P = _dist(raw["ground_truth"], "ground_truth", base_dir)

    kraw = raw.get("kernel")
    if not isinstance(kraw, dict):
        raise ConfigError("kernel: required object missing")
    try:
        kernel = KernelSpec(
            family=kraw.get("family", ""),
            gamma=float(kraw.get("gamma", 1.0)),
            degree=int(kraw.get("degree", 2)),
            a=float(kraw.get("a", 1.0)),
            b=float(kraw.get("b", 1.0)),
            input_dim=int(kraw.get("input_dim", P.input_dim)),
        )
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"kernel: {exc}") from None
    lraw = raw.get("loss", {"family": "squared"})
    try:
        loss = LossSpec(lraw.get("family", "squared"), float(lraw.get("epsilon", 0.0)))
    except (ValueError, TypeError, AttributeError) as exc:
        raise ConfigError(f"loss: {exc}") from None

    if "lambda_schedule" in raw:
        sraw = raw["lambda_schedule"]
        if not isinstance(sraw, dict):
            raise ConfigError("lambda_schedule: expected an object")
        kind = sraw.get("kind", "power")
        if kind == "constant":
            schedule = LambdaSchedule(_num(sraw, "value"))
        elif kind == "power":
            schedule = LambdaSchedule(_num(sraw, "c"), _num(sraw, "exponent"))
        else:
            raise ConfigError(f"lambda_schedule.kind: unknown kind {kind!r}")
    else:
        schedule = LambdaSchedule(_num(raw, "lambda", 0.5 if exp == "consistency" else 0.1))
        if "lambda" not in raw and exp == "consistency":
            schedule = LambdaSchedule(0.5, -0.5)

    try:
        erm = ErmConfig(kernel, loss, 0.0, float(raw.get("beta", DEFAULT_BETA)))
    except ValueError as exc:
        raise ConfigError(f"beta: {exc}") from None

    Q = _dist(raw["Q"], "Q", base_dir) if "Q" in raw else None
    contamination = raw.get("contamination")
    if contamination is not None:
        if not isinstance(contamination, dict) or "mode" not in contamination:
            raise ConfigError("contamination: expected an object with 'mode' and 'magnitude'")
        try:
            Q = perturb(P, contamination["mode"], float(contamination.get("magnitude", 0.0)),
                        int(contamination.get("seed", 0)))
        except ValueError as exc:
            raise ConfigError(f"contamination: {exc}") from None
    H = _dist(raw["H"], "H", base_dir) if "H" in raw else None
    family = tuple(_dist(f, f"family[{i}]", base_dir) for i, f in enumerate(raw.get("family", [])))

    try:
        return ExperimentConfig(
            name=str(raw.get("name", exp)),
            experiment=exp,
            P=P,
            erm=erm,
            schedule=schedule,
            seed=_num(raw, "seed", 0, int),
            Q=Q,
            H=H,
            contamination=contamination,
            n=_num(raw, "N", 20, int),
            n_grid=tuple(int(v) for v in raw.get("N_grid", [])),
            replications=_num(raw, "M", 100, int),
            p=float(raw["p"]) if "p" in raw else None,
            t_grid=tuple(float(v) for v in raw.get("t_grid", [])),
            delta=_num(raw, "delta", 0.05),
            epsilon=_num(raw, "epsilon", 0.05),
            kappa=_num(raw, "kappa", math.inf),
            deviation=_num(raw, "deviation", 0.01),
            bootstrap=_num(raw, "bootstrap", 200, int),
            family=family,
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    try:
        return parse_config(raw, os.path.dirname(os.path.abspath(path)))
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def reference_path(name: str) -> str:
    """Path of a bundled reference config, e.g. ``reference_path("quantitative")``."""
    here = os.path.join(os.path.dirname(__file__), "data")
    path = os.path.join(here, f"reference_{name}.json")
    if not os.path.exists(path):
        raise ConfigError(f"no bundled reference config named {name!r}")
    return path
