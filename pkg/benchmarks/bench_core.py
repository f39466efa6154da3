"""Compare the compiled flow kernels with the pure-Python fallback.

Usage::

    python3 benchmarks/bench_core.py [--repeat 5] [--sizes 10,40,160]

Prints one CSV row per (routine, size, backend) with the best wall time over
``--repeat`` runs, plus the speedup of the compiled backend and a check that
both backends return the same flow value.
"""
import argparse
import csv
import sys
import timeit

import numpy as np

from rkhsrobust import _backend, _flowpy, metrics
from rkhsrobust.distributions import DiscreteDistribution

try:
    from rkhsrobust import _core
except ImportError:
    _core = None


def _bipartite(n, rng):
    supply = rng.dirichlet(np.ones(n))
    demand = rng.dirichlet(np.ones(n))
    adj = rng.random((n, n)) < 0.2
    return supply, demand, adj


def _interval(n, rng):
    a, b = np.sort(rng.normal(size=n)), np.sort(rng.normal(size=n))
    return a, rng.dirichlet(np.ones(n)), b, rng.dirichlet(np.ones(n)), 0.1


def _prokhorov_pair(n, rng):
    P = DiscreteDistribution(rng.normal(size=(n, 2)), rng.uniform(0.1, 1, n))
    Q = DiscreteDistribution(rng.normal(size=(n, 2)) + 0.3, rng.uniform(0.1, 1, n))
    return P, Q


def _with_backend(impl, fn):
    """Run ``fn`` with metrics routed through ``impl``."""
    saved = _backend.bipartite_max_flow, _backend.interval_flow_1d
    _backend.bipartite_max_flow, _backend.interval_flow_1d = impl.bipartite_max_flow, impl.interval_flow_1d
    try:
        return fn()
    finally:
        _backend.bipartite_max_flow, _backend.interval_flow_1d = saved


def best_time(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--sizes", default="10,40,160")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    sizes = [int(s) for s in args.sizes.split(",")]

    impls = {"python": _flowpy}
    if _core is not None:
        impls["cython"] = _core
    else:
        print("# compiled extension not built; timing the Python backend only", file=sys.stderr)

    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["routine", "size", "backend", "seconds", "speedup", "value"])
    for n in sizes:
        rng = np.random.default_rng(args.seed + n)
        cases = {
            "bipartite_max_flow": (_bipartite(n, rng), lambda impl, x: impl.bipartite_max_flow(*x)[0]),
            "interval_flow_1d": (_interval(n, rng), lambda impl, x: impl.interval_flow_1d(*x)),
            "prokhorov_2d": (_prokhorov_pair(min(n, 60), rng),
                             lambda impl, x: _with_backend(impl, lambda: metrics.prokhorov(*x))),
        }
        for routine, (data, call) in cases.items():
            times, values = {}, {}
            for name, impl in impls.items():
                values[name] = call(impl, data)
                times[name] = best_time(lambda: call(impl, data), args.repeat)
            if len(values) == 2 and abs(values["python"] - values["cython"]) > 1e-12:
                raise SystemExit(f"{routine} n={n}: backends disagree {values}")
            for name in impls:
                speed = times["python"] / times[name] if name != "python" else 1.0
                size = min(n, 60) if routine == "prokhorov_2d" else n
                w.writerow([routine, size, name, f"{times[name]:.6f}", f"{speed:.1f}", f"{values[name]:.12g}"])


if __name__ == "__main__":
    main()
