import os
import subprocess
import sys

import numpy as np
import pytest
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_flow

from rkhsrobust import _backend, _flowpy

try:
    from rkhsrobust import _core
except ImportError:  # extension not built
    _core = None

IMPLS = [_flowpy] + ([_core] if _core is not None else [])
needs_core = pytest.mark.skipif(_core is None, reason="compiled extension not built")


def _instance(rng, n, m, density):
    supply = rng.integers(1, 50, n)
    demand = rng.integers(1, 50, m)
    adj = rng.random((n, m)) < density
    return supply, demand, adj


def _scipy_flow(supply, demand, adj):
    """Integer max flow on source -> left -> right -> sink with scipy."""
    n, m = adj.shape
    size = n + m + 2
    s, t = n + m, n + m + 1
    cap = np.zeros((size, size), dtype=np.int32)
    cap[s, :n] = supply
    cap[n:n + m, t] = demand
    big = int(supply.sum()) + 1
    cap[:n, n:n + m] = np.where(adj, big, 0)
    return maximum_flow(csr_matrix(cap), s, t).flow_value


def test_backend_selected():
    forced = os.environ.get("RKHSROBUST_PURE_PYTHON", "") not in ("", "0")
    want = "python" if forced or _core is None else "cython"
    assert _backend.BACKEND == want
    assert _backend.bipartite_max_flow is (_flowpy if want == "python" else _core).bipartite_max_flow


def test_pure_python_switch():
    code = "import rkhsrobust; print(rkhsrobust.BACKEND)"
    env = dict(os.environ, RKHSROBUST_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, env=env)
    assert out.stdout.strip() == "python"


@pytest.mark.parametrize("impl", IMPLS, ids=lambda m: m.__name__.rsplit(".", 1)[-1])
@pytest.mark.parametrize("seed", range(30))
def test_max_flow_matches_scipy(impl, seed):
    rng = np.random.default_rng(seed)
    n, m = rng.integers(1, 25, 2)
    supply, demand, adj = _instance(rng, n, m, rng.uniform(0.05, 0.6))
    value, F = impl.bipartite_max_flow(supply.astype(float), demand.astype(float), adj)
    assert value == pytest.approx(_scipy_flow(supply, demand, adj), abs=1e-9)
    # the returned arc flows are a feasible flow of that value
    assert np.all(F >= -1e-12) and np.all(F[~adj] == 0)
    assert np.all(F.sum(axis=1) <= supply + 1e-9) and np.all(F.sum(axis=0) <= demand + 1e-9)
    assert F.sum() == pytest.approx(value, abs=1e-9)


@needs_core
@pytest.mark.parametrize("seed", range(20))
def test_core_matches_python_fractional(seed):
    rng = np.random.default_rng(100 + seed)
    n, m = rng.integers(1, 40, 2)
    supply = rng.dirichlet(np.ones(n))
    demand = rng.dirichlet(np.ones(m))
    adj = rng.random((n, m)) < 0.3
    v_py, _ = _flowpy.bipartite_max_flow(supply, demand, adj)
    v_c, F_c = _core.bipartite_max_flow(supply, demand, adj)
    assert v_c == pytest.approx(v_py, abs=1e-12)
    assert F_c.shape == (n, m)


@pytest.mark.parametrize("impl", IMPLS, ids=lambda m: m.__name__.rsplit(".", 1)[-1])
@pytest.mark.parametrize("seed", range(30))
def test_interval_flow_matches_dinic(impl, seed):
    rng = np.random.default_rng(200 + seed)
    n, m = rng.integers(1, 20, 2)
    a = np.sort(rng.uniform(-1, 1, n))
    b = np.sort(rng.uniform(-1, 1, m))
    # include ties to exercise the closed window
    if seed % 3 == 0:
        b[: min(n, m)] = a[: min(n, m)]
        b.sort()
    wa, wb = rng.dirichlet(np.ones(n)), rng.dirichlet(np.ones(m))
    for eps in (0.0, 0.05, 0.2, 0.7, 3.0):
        adj = np.abs(a[:, None] - b[None, :]) <= eps
        want, _ = _flowpy.bipartite_max_flow(wa, wb, adj)
        assert impl.interval_flow_1d(a, wa, b, wb, eps) == pytest.approx(want, abs=1e-12)


@pytest.mark.parametrize("impl", IMPLS, ids=lambda m: m.__name__.rsplit(".", 1)[-1])
def test_flow_edge_cases(impl):
    v, F = impl.bipartite_max_flow(np.array([0.5, 0.5]), np.array([1.0]), np.zeros((2, 1), dtype=bool))
    assert v == 0.0 and np.all(F == 0)
    v, _ = impl.bipartite_max_flow(np.array([1.0]), np.array([1.0]), np.ones((1, 1), dtype=bool))
    assert v == 1.0
    assert impl.interval_flow_1d(np.array([0.0]), np.array([1.0]), np.array([0.0]), np.array([1.0]), 0.0) == 1.0
