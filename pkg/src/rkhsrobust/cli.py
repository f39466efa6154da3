"""Command line front end.

Exit codes: 0 success or pass, 1 usage error or bad input, 2 a fail
verdict, 3 an inconclusive verdict.
"""
from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from dataclasses import replace

import numpy as np

from . import __version__
from .config import ConfigError, load_config, reference_path
from .distributions import load_csv
from .erm import risk_true, solve
from .kernels import KernelSpec, RejectedInput, growth_profile, kernel_eval
from .losses import GaugeSpec, UnsupportedCombination
from .metrics import MarginalMismatch, d_phi, kantorovich, prokhorov, zeta_p
from .robustness import CURVE_HEADER, exit_code, fmt, read_curves, run_experiment, write_report

OUT_ENV = "RKHSROBUST_OUT"
DEFAULT_OUT = "rkhsrobust_out"
EXIT_OK, EXIT_USAGE, EXIT_FAIL, EXIT_INCONCLUSIVE = 0, 1, 2, 3

log = logging.getLogger("rkhsrobust")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; 2 is reserved for fail verdicts here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _vector(text: str):
    try:
        return np.array([float(v) for v in text.split(",")])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got {text!r}") from None


def _out_dir(args) -> str:
    return args.out or os.environ.get(OUT_ENV) or DEFAULT_OUT


def _existing(path: str) -> str:
    if not os.path.exists(path):
        raise UsageError(f"no such file: {path}")
    return path


def _load_dist(path: str):
    try:
        return load_csv(_existing(path))
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _config(args):
    if getattr(args, "reference", None):
        path = reference_path(args.reference)
    elif getattr(args, "config", None):
        path = _existing(args.config)
    else:
        raise UsageError("a config is required (--config PATH or --reference NAME)")
    cfg = load_config(path)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def cmd_kernel(args) -> int:
    try:
        spec = KernelSpec(args.family, gamma=args.gamma, degree=args.degree, a=args.a, b=args.b,
                          input_dim=args.input_dim)
    except ValueError as exc:
        raise UsageError(f"kernel: {exc}") from None
    w = csv.writer(sys.stdout, lineterminator="\n")
    if args.x1 is not None:
        x2 = args.x1 if args.x2 is None else args.x2
        w.writerow(["x1", "x2", "value"])
        w.writerow([" ".join(fmt(v) for v in args.x1), " ".join(fmt(v) for v in x2),
                    fmt(kernel_eval(spec, args.x1, x2))])
    if spec.is_pds:
        prof = growth_profile(spec, args.radius)
        w.writerow(["growth", "rates", "note"])
        w.writerow([prof.kind, " ".join(fmt(r) for r in prof.rates), prof.note])
    else:
        w.writerow(["growth", "rates", "note"])
        w.writerow(["none", "", "not positive definite"])
    return EXIT_OK


def cmd_metric(args) -> int:
    P, Q = _load_dist(args.first), _load_dist(args.second)
    if P.dim != Q.dim:
        raise UsageError("the two distributions live in different spaces")
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["metric", "p", "value", "lower", "upper_ot", "upper_product"])
    if args.metric == "zeta":
        z = zeta_p(P, Q, args.p)
        w.writerow(["zeta", fmt(args.p), fmt(z.exact), fmt(z.lower_testfn),
                    fmt(z.upper_ot), fmt(z.upper_product)])
    elif args.metric == "prokhorov":
        w.writerow(["prokhorov", "", fmt(prokhorov(P, Q)), "", "", ""])
    elif args.metric == "kantorovich":
        w.writerow(["kantorovich", "1", fmt(kantorovich(P, Q)), "", "", ""])
    else:
        cfg = _config(args)
        g = GaugeSpec(cfg.erm.loss, cfg.erm.kernel, cfg.erm.beta)
        w.writerow(["d_phi", fmt(args.p), fmt(d_phi(P, Q, g, args.p)), "", "", ""])
    return EXIT_OK


def cmd_solve(args) -> int:
    cfg = _config(args)
    dist = _load_dist(args.data) if args.data else cfg.P
    lam = cfg.lam() if args.lam is None else args.lam
    erm = cfg.erm.with_lambda(lam)
    sol = solve(dist, erm)
    out = _out_dir(args)
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, f"{cfg.name}_solution.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["anchor_index", "alpha"])
        for i, a in enumerate(sol.coefficients):
            w.writerow([i, fmt(a)])
    with open(os.path.join(out, f"{cfg.name}_anchors.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["anchor_index"] + [f"x_{k}" for k in range(sol.anchors.shape[1])])
        for i, x in enumerate(sol.anchors):
            w.writerow([i] + [fmt(v) for v in x])
    risk = risk_true(dist, sol, erm.loss, erm.kernel)
    print("objective,risk,reg,norm,iters")
    print(",".join([fmt(sol.objective), fmt(risk), fmt(sol.reg_term), fmt(sol.rkhs_norm),
                    fmt(sol.iterations)]))
    return EXIT_OK


def cmd_experiment(args) -> int:
    cfg = _config(args)
    report = run_experiment(cfg, workers=args.workers)
    rpath, cpath = write_report(report, _out_dir(args))
    print(f"{report.name},{report.experiment},{report.verdict}")
    log.info("wrote %s and %s", rpath, cpath)
    return exit_code([report.verdict])


def cmd_report(args) -> int:
    path = _existing(args.curves)
    try:
        read_curves(path)  # validation only; the text is copied verbatim below
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    table = [list(CURVE_HEADER)] + rows
    widths = [max(len(r[c]) for r in table) for c in range(len(CURVE_HEADER))]
    for r in table:
        print("  ".join(cell.rjust(wd) for cell, wd in zip(r, widths)).rstrip())
    out = _out_dir(args)
    os.makedirs(out, exist_ok=True)
    stem = os.path.splitext(os.path.basename(path))[0]
    dat = os.path.join(out, f"{stem}.dat")
    with open(dat, "w") as fh:
        fh.write("# " + " ".join(CURVE_HEADER) + "\n")
        for r in rows:
            # gnuplot reads NaN as a missing point
            fh.write(" ".join(c if c else "NaN" for c in r) + "\n")
    verdicts = [r[-1] for r in rows if r[-1] in ("pass", "fail", "inconclusive")]
    return exit_code(verdicts)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="rkhsrobust", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./{DEFAULT_OUT})")
    common.add_argument("--seed", type=int, help="override the master seed")
    common.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    k = sub.add_parser("kernel", parents=[common], help="evaluate a kernel and its growth profile")
    k.add_argument("--family", required=True)
    k.add_argument("--gamma", type=float, default=1.0)
    k.add_argument("--degree", type=int, default=2)
    k.add_argument("--a", type=float, default=1.0)
    k.add_argument("--b", type=float, default=1.0)
    k.add_argument("--input-dim", type=int, default=1)
    k.add_argument("--x1", type=_vector)
    k.add_argument("--x2", type=_vector)
    k.add_argument("--radius", type=float, help="input domain radius (polynomial kernels)")
    k.set_defaults(func=cmd_kernel)

    m = sub.add_parser("metric", parents=[common], help="distance between two distribution CSVs")
    m.add_argument("first")
    m.add_argument("second")
    m.add_argument("--p", type=float, default=1.0)
    m.add_argument("--metric", choices=("zeta", "prokhorov", "kantorovich", "d_phi"), default="zeta")
    m.add_argument("--config", help="experiment config supplying the gauge (d_phi only)")
    m.set_defaults(func=cmd_metric)

    s = sub.add_parser("solve", parents=[common], help="regularised ERM on a distribution")
    s.add_argument("--config")
    s.add_argument("--reference")
    s.add_argument("--data", help="distribution CSV (default: the config ground truth)")
    s.add_argument("--lambda", dest="lam", type=float)
    s.set_defaults(func=cmd_solve)

    e = sub.add_parser("experiment", parents=[common], help="run an experiment config")
    e.add_argument("--config")
    e.add_argument("--reference", help="name of a bundled config, e.g. quantitative")
    e.add_argument("--workers", type=int, default=1)
    e.set_defaults(func=cmd_experiment)

    r = sub.add_parser("report", parents=[common], help="render a curves CSV")
    r.add_argument("curves")
    r.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"rkhsrobust: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (RejectedInput, UnsupportedCombination, MarginalMismatch) as exc:
        print(f"rkhsrobust: rejected input: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
