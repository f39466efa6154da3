"""Monte Carlo experiments on the robustness of regularised kernel ERM.

Every experiment is driven by an :class:`ExperimentConfig` and returns a
report carrying a flat parameter listing and a table of curve rows. Both
are written with round-trip exact float formatting so identical configs
give identical files.

Replication ``j`` always samples from the Philox stream ``(seed, j)``.
Laws under ``P`` and ``Q`` built with the same seed therefore use the same
uniforms, i.e. the samples are coupled index by index.
"""
from __future__ import annotations

import csv
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .config import ExperimentConfig
from .distributions import (DiscreteDistribution, empirical_from_indices, make_rng, membership,
                            mix, moment, sample_indices)
from .erm import ErmConfig, solution_distance, solve
from .kernels import RejectedInput
from .losses import GaugeSpec, UnsupportedCombination, gauge_values, lipschitz_profile
from .metrics import d_phi, growth_weight, prokhorov, wasserstein1_1d, zeta_p

log = logging.getLogger(__name__)

VERDICTS = ("pass", "fail", "inconclusive")
BOOTSTRAP_STREAM = 0xB007
N_SE = 3.0
REPORT_HEADER = ("experiment", "param", "value")
CURVE_HEADER = ("N", "t", "median", "p90", "bound", "measured", "verdict")


def fmt(v) -> str:
    """Round-trip exact text for report cells; ``None`` becomes empty."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


@dataclass(frozen=True)
class CurveRow:
    N: Optional[int] = None
    t: Optional[float] = None
    median: Optional[float] = None
    p90: Optional[float] = None
    bound: Optional[float] = None
    measured: Optional[float] = None
    verdict: str = ""

    def cells(self):
        return [fmt(getattr(self, k)) for k in CURVE_HEADER]


@dataclass
class Report:
    name: str
    experiment: str
    verdict: str
    params: dict = field(default_factory=dict)
    rows: list = field(default_factory=list)

    def __post_init__(self):
        if self.verdict not in VERDICTS:
            raise ValueError(f"unknown verdict {self.verdict!r}")


@dataclass
class RobustnessReport(Report):
    measured: float = 0.0
    bound: float = 0.0
    channel: str = ""
    se: float = 0.0


@dataclass
class ConsistencyReport(Report):
    sizes: tuple = ()
    medians: tuple = ()
    p90s: tuple = ()
    theta: float = 0.0
    rate: float = math.nan  # fitted exponential tail rate
    prefactor: float = math.nan
    residual: float = math.nan

    def __post_init__(self):
        super().__post_init__()
        if any(q < 0 for q in (*self.medians, *self.p90s)):
            raise ValueError("deviation quantiles must be nonnegative")


@dataclass(frozen=True)
class LawEstimate:
    """Law of the optimal value over M replications.

    ``values`` is indexed by replication (NaN where the solver failed); the
    law itself holds the successful replications with equal weights.
    """

    law: Optional[DiscreteDistribution]
    values: np.ndarray
    measure: str
    n: int
    lam: float
    seed: int
    failures: int = 0

    @property
    def replications(self) -> int:
        return self.values.shape[0]


# -- replication driver -------------------------------------------------------

def _replicate(fn: Callable[[int], object], m: int, order=None, workers: int = 1) -> list:
    """Run ``fn(j)`` for j < m and return the results indexed by j."""
    idx = list(range(m)) if order is None else [int(j) for j in order]
    if sorted(idx) != list(range(m)):
        raise ValueError("order must be a permutation of the replication indices")
    out = [None] * m
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for j, r in zip(idx, pool.map(fn, idx)):
                out[j] = r
    else:
        for j in idx:
            out[j] = fn(j)
    return out


def _sample(dist: DiscreteDistribution, n: int, seed: int, j: int) -> DiscreteDistribution:
    return empirical_from_indices(dist, sample_indices(dist, n, seed, stream=j))


def law_of_estimator(dist: DiscreteDistribution, cfg: ExperimentConfig, n: int, lam: float,
                     measure: str = "P", order=None, workers: int = 1) -> LawEstimate:
    """Law of theta_hat(P_N, lam) over ``cfg.replications`` replications.

    ``order`` permutes the execution order and ``workers`` runs replications
    on a thread pool; neither changes the result.
    """
    erm = cfg.erm.with_lambda(lam)

    def one(j):
        try:
            return solve(_sample(dist, n, cfg.seed, j), erm).objective
        except (ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
            log.warning("replication %d failed: %s", j, exc)
            return math.nan

    vals = np.asarray(_replicate(one, cfg.replications, order, workers), dtype=float)
    ok = np.isfinite(vals)
    law = DiscreteDistribution(vals[ok]) if ok.any() else None
    return LawEstimate(law, vals, measure, int(n), float(lam), cfg.seed, int((~ok).sum()))


def _require_q(cfg: ExperimentConfig) -> DiscreteDistribution:
    if cfg.Q is None:
        raise RejectedInput("config needs an explicit Q or a contamination spec")
    return cfg.Q


def _w1(a: np.ndarray, b: np.ndarray) -> float:
    if a.size == b.size:
        # equal uniform weights: the optimal coupling matches order statistics
        return float(np.mean(np.abs(np.sort(a) - np.sort(b))))
    return wasserstein1_1d(DiscreteDistribution(a), DiscreteDistribution(b))


def bootstrap_se(a: np.ndarray, b: np.ndarray, resamples: int, seed: int) -> float:
    """Bootstrap standard error of W1 between two samples of scalars."""
    if resamples < 2:
        return 0.0
    rng = make_rng(seed, BOOTSTRAP_STREAM)
    stats = np.empty(resamples)
    for r in range(resamples):
        ia = rng.integers(0, a.size, a.size)
        ib = rng.integers(0, b.size, b.size)
        stats[r] = _w1(a[ia], b[ib])
    if np.ptp(stats) == 0:  # the mean of equal values can round, std would not be 0
        return 0.0
    return float(stats.std(ddof=1))


def _verdict(measured: float, upper: float, lower: float, se: float) -> str:
    if measured > upper + N_SE * se:
        return "fail"
    if measured <= lower + N_SE * se:
        return "pass"
    return "inconclusive"


def _laws(cfg: ExperimentConfig, order=None, workers=1):
    Q = _require_q(cfg)
    lam = cfg.lam()
    lp = law_of_estimator(cfg.P, cfg, cfg.n, lam, "P", order, workers)
    lq = law_of_estimator(Q, cfg, cfg.n, lam, "Q", order, workers)
    if lp.law is None or lq.law is None:
        raise ArithmeticError("every replication failed")
    return Q, lam, lp, lq


def check_quantitative(cfg: ExperimentConfig, order=None, workers: int = 1) -> RobustnessReport:
    """Compare W1 between the estimator laws under P and Q with constant * zeta_p(P, Q)."""
    erm = cfg.erm
    profile = lipschitz_profile(erm.loss, erm.kernel, erm.beta)
    p = profile.order if cfg.p is None else cfg.p
    g = GaugeSpec(erm.loss, erm.kernel, erm.beta)
    Q = _require_q(cfg)
    for label, dist in (("P", cfg.P), ("Q", Q)):
        if not membership(dist, g, p, cfg.kappa):
            raise RejectedInput(f"{label} is outside the moment class (phi^{p} moment > {cfg.kappa})")
    _, lam, lp, lq = _laws(cfg, order, workers)

    measured = wasserstein1_1d(lp.law, lq.law)
    se = bootstrap_se(lp.law.values, lq.law.values, cfg.bootstrap, cfg.seed)
    z = zeta_p(cfg.P, Q, p)
    c = profile.constant
    if z.exact is not None:
        channel, upper, lower = "exact", c * z.exact, c * z.exact
    else:
        channel, upper, lower = "upper_ot", c * z.upper_ot, c * z.lower_testfn
    verdict = _verdict(measured, upper, lower, se)

    both = np.isfinite(lp.values) & np.isfinite(lq.values)
    gaps = np.abs(lp.values[both] - lq.values[both])
    params = cfg.echo()
    params.update({
        "lambda_N": lam,
        "p": p,
        "constant": c,
        "certified_constant": profile.certified_constant,
        "zeta_exact": z.exact,
        "zeta_upper_ot": z.upper_ot,
        "zeta_upper_product": z.upper_product,
        "zeta_lower": z.lower_testfn,
        "channel": channel,
        "bound_upper": upper,
        "bound_lower": lower,
        "measured_w1": measured,
        "bootstrap_se": se,
        "bootstrap_resamples": cfg.bootstrap,
        "failures_P": lp.failures,
        "failures_Q": lq.failures,
        "verdict": verdict,
    })
    row = CurveRow(N=cfg.n, median=float(np.median(gaps)), p90=float(np.quantile(gaps, 0.9)),
                   bound=upper, measured=measured, verdict=verdict)
    return RobustnessReport(cfg.name, "quantitative", verdict, params, [row],
                            measured=measured, bound=upper, channel=channel, se=se)


def check_qualitative(cfg: ExperimentConfig, delta: Optional[float] = None,
                      epsilon: Optional[float] = None, order=None, workers: int = 1) -> RobustnessReport:
    """Report the (delta-in, epsilon-out) pair for the robustness definition.

    The premise is d_phi(P, Q) <= delta; the conclusion checked is that the
    Prokhorov distance between the estimator laws is at most epsilon. Since
    delta(epsilon) is not constructive, a miss is reported as inconclusive
    rather than as a failure.
    """
    delta = cfg.delta if delta is None else delta
    epsilon = cfg.epsilon if epsilon is None else epsilon
    erm = cfg.erm
    g = GaugeSpec(erm.loss, erm.kernel, erm.beta)
    Q = _require_q(cfg)
    lam = cfg.lam()
    dist_in = d_phi(cfg.P, Q, g)
    premise = dist_in <= delta
    side = math.isfinite(erm.beta) and lam <= epsilon / (6.0 * erm.beta ** 2)

    params = cfg.echo()
    params.update({"lambda_N": lam, "delta": delta, "epsilon": epsilon, "d_phi": dist_in,
                   "premise_holds": premise, "side_condition_holds": side,
                   "moment_P": moment(cfg.P, g), "moment_Q": moment(Q, g), "kappa": cfg.kappa})
    if not side:
        params["side_condition_violation"] = (f"lambda_N={fmt(lam)} exceeds "
                                              f"epsilon/(6 beta^2)={fmt(epsilon / (6.0 * erm.beta ** 2))}")
    if not premise:
        params["verdict"] = "inconclusive"
        row = CurveRow(N=cfg.n, bound=epsilon, verdict="inconclusive")
        return RobustnessReport(cfg.name, "qualitative", "inconclusive", params, [row],
                                measured=math.nan, bound=epsilon, channel="prokhorov")

    _, _, lp, lq = _laws(cfg, order, workers)
    dist_out = prokhorov(lp.law, lq.law)
    verdict = "pass" if dist_out <= epsilon else "inconclusive"
    params.update({"prokhorov_laws": dist_out, "failures_P": lp.failures,
                   "failures_Q": lq.failures, "verdict": verdict})
    row = CurveRow(N=cfg.n, bound=epsilon, measured=dist_out, verdict=verdict)
    return RobustnessReport(cfg.name, "qualitative", verdict, params, [row],
                            measured=dist_out, bound=epsilon, channel="prokhorov")


def stability_curve(P: DiscreteDistribution, H: DiscreteDistribution, t_grid: Sequence[float],
                    cfg: ExperimentConfig) -> Report:
    """Optimal value of the ball-constrained problem along Q_t = (1-t) P + t H.

    Each row holds |theta(Q_t) - theta(P)| as ``measured`` and the
    domination bound t (int phi dP + int phi dH) as ``bound``.
    """
    ts = sorted(float(t) for t in t_grid)
    if any(not 0.0 <= t <= 1.0 for t in ts):
        raise ValueError("t_grid must lie in [0, 1]")
    erm = cfg.erm.with_lambda(0.0)
    g = GaugeSpec(erm.loss, erm.kernel, erm.beta)
    theta_p = solve(P, erm).objective
    mass = moment(P, g) + moment(H, g)
    params = cfg.echo()
    params.update({"theta_P": theta_p, "phi_moment_sum": mass})
    rows, verdict = [], "pass"
    for t in ts:
        Qt = mix(P, H, t)
        theta_t = theta_p if t == 0.0 else solve(Qt, erm).objective
        gap = abs(theta_t - theta_p)
        dist = d_phi(Qt, P, g)
        bound = t * mass
        ok = gap <= bound + 1e-12 * max(1.0, abs(theta_p))
        if not ok:
            verdict = "fail"
        params[f"theta@t={t!r}"] = theta_t
        params[f"d_phi@t={t!r}"] = dist
        rows.append(CurveRow(t=t, bound=bound, measured=gap, verdict="pass" if ok else "fail"))
    params["verdict"] = verdict
    return Report(cfg.name, "stability", verdict, params, rows)


def _tail_fit(sizes, freqs):
    """Least squares fit of log freq = log a - rate * N over the positive frequencies."""
    sizes = np.asarray(sizes, dtype=float)
    freqs = np.asarray(freqs, dtype=float)
    keep = freqs > 0
    if keep.sum() < 2:
        return math.nan, math.nan, math.nan
    A = np.column_stack([np.ones(keep.sum()), -sizes[keep]])
    coef, *_ = np.linalg.lstsq(A, np.log(freqs[keep]), rcond=None)
    resid = np.log(freqs[keep]) - A @ coef
    return float(coef[1]), float(math.exp(coef[0])), float(np.sqrt(np.mean(resid ** 2)))


def consistency_tolerance(theta: float) -> float:
    return max(0.01 * abs(theta), 0.005)


def _deviations(dist, cfg, n, theta, order, workers):
    law = law_of_estimator(dist, cfg, n, cfg.lam(n), order=order, workers=workers)
    dev = np.abs(law.values - theta)
    return dev[np.isfinite(dev)], law.failures


def consistency_curve(P: DiscreteDistribution, cfg: ExperimentConfig, order=None,
                      workers: int = 1) -> ConsistencyReport:
    """Deviation |theta_hat(P_N, lam_N) - theta(P)| along the N grid.

    With ``cfg.family`` set, every member is run as well and the reported
    curve is the worst case per N. The verdict is "pass" when the medians
    are nonincreasing up to one inversion and the last median is within
    :func:`consistency_tolerance`; a miss is "inconclusive" because a
    finite grid cannot refute an asymptotic statement.
    """
    sizes = tuple(cfg.n_grid) or (cfg.n,)
    if list(sizes) != sorted(set(sizes)):
        raise ValueError("N grid must be strictly increasing")
    erm = cfg.erm
    g = GaugeSpec(erm.loss, erm.kernel, erm.beta)
    members = (P, *cfg.family)
    p = cfg.p if cfg.p is not None else 1.0
    for k, dist in enumerate(members):
        if not membership(dist, g, p, cfg.kappa):
            raise RejectedInput(f"family member {k} is outside the moment class")
    thetas = [solve(dist, erm.with_lambda(0.0)).objective for dist in members]

    med = np.zeros((len(members), len(sizes)))
    q90 = np.zeros_like(med)
    freq = np.zeros_like(med)
    failures = 0
    for k, (dist, th) in enumerate(zip(members, thetas)):
        for i, n in enumerate(sizes):
            dev, nfail = _deviations(dist, cfg, n, th, order, workers)
            failures += nfail
            med[k, i] = np.median(dev)
            q90[k, i] = np.quantile(dev, 0.9)
            freq[k, i] = np.mean(dev >= cfg.deviation)
    worst = med.argmax(axis=0)
    cols = np.arange(len(sizes))
    medians, p90s, freqs = med[worst, cols], q90[worst, cols], freq.max(axis=0)
    rate, pref, resid = _tail_fit(sizes, freqs)

    inversions = int(np.sum(np.diff(medians) > 0))
    tol = consistency_tolerance(thetas[0])
    ok = inversions <= 1 and medians[-1] <= tol
    verdict = "pass" if ok else "inconclusive"
    params = cfg.echo()
    params.update({"theta_P": thetas[0], "family_size": len(members), "deviation_delta": cfg.deviation,
                   "inversions": inversions, "final_tolerance": tol, "rate": rate,
                   "prefactor": pref, "rate_residual": resid, "failures": failures})
    for i, n in enumerate(sizes):
        params[f"lambda@N={n}"] = cfg.lam(n)
        params[f"freq@N={n}"] = freqs[i]
        side = math.isfinite(erm.beta) and cfg.lam(n) <= cfg.deviation / (4.0 * erm.beta ** 2)
        params[f"side_condition@N={n}"] = side
    if len(members) > 1:
        for k, th in enumerate(thetas):
            params[f"theta_member_{k}"] = th
    params["verdict"] = verdict
    rows = []
    for i, n in enumerate(sizes):
        row_ok = i == 0 or medians[i] <= medians[i - 1]
        rows.append(CurveRow(N=n, median=medians[i], p90=p90s[i], measured=medians[i],
                             bound=tol if i == len(sizes) - 1 else None,
                             verdict="pass" if row_ok else "inversion"))
    return ConsistencyReport(cfg.name, "consistency", verdict, params, rows, sizes=sizes,
                             medians=tuple(medians), p90s=tuple(p90s), theta=thetas[0],
                             rate=rate, prefactor=pref, residual=resid)


def product_coupling_cost(A: DiscreteDistribution, B: DiscreteDistribution, p: float) -> float:
    """E over the product A x B of c_p(z, z') |z - z'|."""
    D = np.linalg.norm(A.atoms[:, None, :] - B.atoms[None, :, :], axis=2)
    return float(A.weights @ (growth_weight(A.atoms, B.atoms, p) * D) @ B.weights)


def solution_stability(P: DiscreteDistribution, Q: DiscreteDistribution, cfg: ExperimentConfig,
                       order=None, workers: int = 1) -> RobustnessReport:
    """Distance between coupled sample solutions against the strong convexity bound.

    The modulus is taken as 2 lam_N, the contribution of the penalty alone,
    so the bound reads sqrt(3 / (2 lam_N) * E_{P_N x Q_N}[c_p |z - z'|]).
    """
    erm = cfg.erm
    if erm.loss.family != "squared":
        raise UnsupportedCombination("solution stability needs the squared loss")
    lam = cfg.lam()
    if not lam > 0:
        raise UnsupportedCombination("solution stability needs lambda_N > 0")
    p = cfg.p if cfg.p is not None else lipschitz_profile(erm.loss, erm.kernel, erm.beta).order
    e = erm.with_lambda(lam)
    modulus = 2.0 * lam

    def one(j):
        PN, QN = _sample(P, cfg.n, cfg.seed, j), _sample(Q, cfg.n, cfg.seed, j)
        dist = solution_distance(solve(PN, e), solve(QN, e), erm.kernel)
        bound = math.sqrt(3.0 / modulus * product_coupling_cost(PN, QN, p))
        return dist, bound

    res = np.asarray(_replicate(one, cfg.replications, order, workers))
    dists, bounds = res[:, 0], res[:, 1]
    frac = float(np.mean(dists <= bounds))
    verdict = "pass" if frac == 1.0 else "fail"
    params = cfg.echo()
    params.update({"lambda_N": lam, "p": p, "modulus": modulus, "fraction_satisfied": frac,
                   "max_distance": float(dists.max()), "min_bound": float(bounds.min()),
                   "max_ratio": float(np.max(dists / np.where(bounds > 0, bounds, np.inf))),
                   "verdict": verdict})
    row = CurveRow(N=cfg.n, median=float(np.median(dists)), p90=float(np.quantile(dists, 0.9)),
                   bound=float(np.median(bounds)), measured=float(dists.max()), verdict=verdict)
    return RobustnessReport(cfg.name, "solution_stability", verdict, params, [row],
                            measured=float(dists.max()), bound=float(bounds.min()),
                            channel="product", se=0.0)


def run_experiment(cfg: ExperimentConfig, workers: int = 1) -> Report:
    kind = cfg.experiment
    if kind == "quantitative":
        return check_quantitative(cfg, workers=workers)
    if kind == "qualitative":
        return check_qualitative(cfg, workers=workers)
    if kind == "stability":
        if cfg.H is None:
            raise RejectedInput("stability experiment needs H")
        return stability_curve(cfg.P, cfg.H, cfg.t_grid or (0.0,), cfg)
    if kind == "consistency":
        return consistency_curve(cfg.P, cfg, workers=workers)
    if kind == "solution_stability":
        return solution_stability(cfg.P, _require_q(cfg), cfg, workers=workers)
    raise ValueError(f"unknown experiment {kind!r}")


def exit_code(verdicts) -> int:
    verdicts = list(verdicts)
    if "fail" in verdicts:
        return 2
    if "inconclusive" in verdicts:
        return 3
    return 0


def write_report(report: Report, outdir: str) -> tuple:
    """Write ``<name>_report.csv`` and ``<name>_curves.csv``; returns both paths."""
    os.makedirs(outdir, exist_ok=True)
    rpath = os.path.join(outdir, f"{report.name}_report.csv")
    cpath = os.path.join(outdir, f"{report.name}_curves.csv")
    with open(rpath, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_HEADER)
        for k, v in report.params.items():
            w.writerow([report.name, k, fmt(v)])
    write_curves(report.rows, cpath)
    return rpath, cpath


def write_curves(rows, path: str) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CURVE_HEADER)
        for r in rows:
            w.writerow(r.cells())


def read_curves(path: str) -> list:
    """Inverse of :func:`write_curves`."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != CURVE_HEADER:
            raise ValueError(f"{path}: expected header {','.join(CURVE_HEADER)}")
        rows = []
        for lineno, cells in enumerate(reader, start=2):
            if len(cells) != len(CURVE_HEADER):
                raise ValueError(f"{path}:{lineno}: expected {len(CURVE_HEADER)} fields")
            try:
                vals = {k: (None if c == "" else (int(c) if k == "N" else float(c)))
                        for k, c in zip(CURVE_HEADER[:-1], cells[:-1])}
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
            rows.append(CurveRow(verdict=cells[-1], **vals))
    return rows
