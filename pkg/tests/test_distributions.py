import logging

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from rkhsrobust.distributions import (DiscreteDistribution, empirical, empirical_from_indices, load_csv,
                                      make_rng, membership, mix, moment, perturb, sample, sample_indices,
                                      save_csv)
from rkhsrobust.kernels import KernelSpec
from rkhsrobust.losses import GaugeSpec, LossSpec

from .conftest import random_dist

# phi(z) = y^2 + beta^2 k(x, x) with k = linear kernel at x = 0 reduces to y^2
Y2 = GaugeSpec(LossSpec("squared"), KernelSpec("linear"), 1.0)

weights = arrays(float, st.integers(1, 8), elements=st.floats(1e-6, 1e6))


@given(weights)
def test_weights_normalised(w):
    d = DiscreteDistribution(np.arange(len(w), dtype=float), w)
    assert abs(d.weights.sum() - 1.0) <= 1e-12
    assert np.all(d.weights > 0)


@pytest.mark.parametrize("bad", [[0.5, 0.0], [1.0, -1.0], [1.0, np.nan]])
def test_invalid_weights(bad):
    with pytest.raises(ValueError):
        DiscreteDistribution([[0.0], [1.0]], bad)


def test_immutable():
    d = DiscreteDistribution([[0.0, 1.0]])
    with pytest.raises(ValueError):
        d.atoms[0, 0] = 3.0


def test_sample_single_atom():
    d = DiscreteDistribution([[0.5, 2.0]])
    s = sample(d, 7, seed=3)
    assert s.shape == (7, 2) and np.all(s == [0.5, 2.0])


def test_sample_frequencies():
    d = DiscreteDistribution([[0.0], [1.0]])
    s = sample(d, 100_000, seed=11)
    assert abs(np.mean(s[:, 0]) - 0.5) <= 0.01


def test_sample_deterministic_and_seed_sensitive():
    d = DiscreteDistribution(np.arange(10.0), np.arange(1.0, 11.0))
    a, b = sample(d, 50, seed=1), sample(d, 50, seed=1)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, sample(d, 50, seed=2))
    assert not np.array_equal(a, sample(d, 50, seed=1, stream=1))


def test_sample_rejects_zero():
    with pytest.raises(ValueError):
        sample(DiscreteDistribution([[0.0]]), 0, seed=1)


def test_streams_are_random_access():
    # stream j does not depend on which other streams were drawn first
    d = DiscreteDistribution(np.arange(5.0))
    first = sample_indices(d, 20, seed=9, stream=3)
    for j in range(5):
        sample_indices(d, 20, seed=9, stream=j)
    assert np.array_equal(first, sample_indices(d, 20, seed=9, stream=3))
    assert make_rng(9, 3).random() == make_rng(9, 3).random()


def test_empirical_examples():
    z1, z2 = [0.0, 1.0], [2.0, 3.0]
    d = empirical([z1])
    assert d.size == 1 and d.weights[0] == 1.0
    d = empirical([z1, z2])
    assert d.weights.tolist() == [0.5, 0.5]
    d = empirical([z1, z1, z2])
    assert d.size == 3 and np.allclose(d.weights, 1 / 3)
    with pytest.raises(ValueError):
        empirical(np.zeros((0, 2)))


def test_empirical_from_indices_same_measure(rng):
    d = random_dist(rng, 6)
    idx = sample_indices(d, 40, seed=4)
    a = empirical_from_indices(d, idx)
    b = empirical(d.atoms[idx])
    assert a.same_measure(b)
    assert a.size <= d.size


def test_moment_examples():
    d = DiscreteDistribution([[0.0, 2.0]])
    assert moment(d, Y2, 1) == 4.0
    assert moment(d, Y2, 2) == 16.0
    d = DiscreteDistribution([[0.0, 2.0], [0.0, 0.0]], [0.25, 0.75])
    assert moment(d, Y2, 1) == 1.0
    assert membership(d, Y2, 1, 1.0) and not membership(d, Y2, 1, 0.99)
    with pytest.raises(ValueError):
        moment(d, Y2, 0.5)


def test_empirical_moments_converge(rng):
    d = random_dist(rng, 7, scale=2.0)
    n = 100_000
    s = sample(d, n, seed=21)
    phi = s[:, 1] ** 2 + s[:, 0] ** 2
    emp = moment(empirical(s), Y2, 1)
    assert emp == pytest.approx(phi.mean())
    se = phi.std(ddof=1) / np.sqrt(n)
    assert abs(emp - moment(d, Y2, 1)) <= 3 * se


def test_mix_examples():
    P, H = DiscreteDistribution([[0.0, 0.0]]), DiscreteDistribution([[1.0, 1.0]])
    assert mix(P, H, 0.0) is P
    assert mix(P, H, 1.0) is H
    m = mix(P, H, 0.5)
    assert m.weights.tolist() == [0.5, 0.5]
    with pytest.raises(ValueError):
        mix(P, H, 1.5)
    with pytest.raises(ValueError):
        mix(P, DiscreteDistribution([[1.0, 1.0, 1.0]]), 0.5)


@given(st.floats(0, 1), st.integers(0, 2 ** 32))
def test_mix_affine(t, seed):
    rng = np.random.default_rng(seed)
    P, H = random_dist(rng, 4), random_dist(rng, 3)
    g = GaugeSpec(LossSpec("squared"), KernelSpec("gaussian"), 1.5)
    lhs = moment(mix(P, H, t), g)
    rhs = (1 - t) * moment(P, g) + t * moment(H, g)
    assert lhs == pytest.approx(rhs, rel=1e-14, abs=1e-15)


def test_perturb_examples(rng):
    P = random_dist(rng, 6)
    assert perturb(P, "shift_y", 0.0) is P
    Q = perturb(P, "shift_y", 0.05, seed=2)
    assert np.allclose(np.abs(Q.y - P.y), 0.05)
    assert np.array_equal(Q.x, P.x) and np.array_equal(Q.weights, P.weights)
    Q = perturb(P, "shift_x", 0.1, seed=2)
    assert np.allclose(np.linalg.norm(Q.x - P.x, axis=1), 0.1)
    q = perturb(DiscreteDistribution([[0.0, 0.74], [0.0, -0.74], [0.0, 1.5]]), "quantize", 0.5)
    assert q.y.tolist() == [0.5, -0.5, 1.5]
    with pytest.raises(ValueError):
        perturb(P, "rotate", 0.1)
    with pytest.raises(ValueError):
        perturb(P, "shift_y", -0.1)


@given(st.sampled_from(["shift_y", "shift_x", "quantize"]), st.floats(0, 2), st.integers(0, 1000))
def test_perturb_bounded_and_seeded(mode, m, seed):
    P = random_dist(np.random.default_rng(seed), 5)
    Q = perturb(P, mode, m, seed)
    assert np.all(np.linalg.norm(Q.atoms - P.atoms, axis=1) <= m + 1e-12)
    assert Q.same_measure(perturb(P, mode, m, seed)) if Q.size == P.size else True
    assert np.array_equal(Q.atoms, perturb(P, mode, m, seed).atoms)


def test_csv_round_trip(tmp_path, rng):
    d = random_dist(rng, 5, dim=3)
    path = tmp_path / "d.csv"
    save_csv(d, path)
    e = load_csv(path)
    assert np.array_equal(e.atoms, d.atoms)
    assert np.allclose(e.weights, d.weights, rtol=0, atol=1e-15)
    assert path.read_text().splitlines()[0] == "x_0,x_1,y,weight"


def test_csv_renormalises_with_warning(tmp_path, caplog):
    path = tmp_path / "d.csv"
    path.write_text("x_0,y,weight\n0,1,2\n1,2,2\n")
    with caplog.at_level(logging.WARNING):
        d = load_csv(path)
    assert d.weights.tolist() == [0.5, 0.5]
    assert "renormalising" in caplog.text


@pytest.mark.parametrize("text,where", [
    ("x_0,y\n0,1\n", "header"),
    ("x_1,y,weight\n0,1,1\n", "input columns"),
    ("x_0,y,weight\n0,1,1\n0,1\n", ":3:"),
    ("x_0,y,weight\n0,abc,1\n", ":2:"),
    ("x_0,y,weight\n", "no atoms"),
])
def test_csv_diagnostics(tmp_path, text, where):
    path = tmp_path / "bad.csv"
    path.write_text(text)
    with pytest.raises(ValueError, match=where):
        load_csv(path)
