import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from rkhsrobust.kernels import (FAMILIES, GrowthProfile, InternalConsistencyError, KernelSpec, RejectedInput,
                                cross_kernel, function_eval, function_values, gram_matrix, growth_function,
                                growth_profile, kernel_eval, polynomial_calm_rate, rkhs_norm)

CALM = [
    KernelSpec("linear", input_dim=2),
    KernelSpec("gaussian", gamma=0.125, input_dim=2),
    KernelSpec("gaussian", gamma=3.0, input_dim=2),
    KernelSpec("laplacian", gamma=1.0, input_dim=2),
    KernelSpec("laplacian", gamma=0.2, input_dim=3),
    KernelSpec("polynomial", gamma=1.0, degree=2, input_dim=2),
    KernelSpec("polynomial", gamma=0.5, degree=3, input_dim=2),
    KernelSpec("polynomial", gamma=2.0, degree=1, input_dim=2),
]
PDS = [KernelSpec(f, input_dim=3) for f in ("linear", "gaussian", "laplacian")] + [
    KernelSpec("polynomial", gamma=0.7, degree=3, input_dim=3)]

finite = st.floats(-5, 5, allow_nan=False)


def test_kernel_examples():
    assert kernel_eval(KernelSpec("linear", input_dim=2), [1, 2], [3, 4]) == 11
    x = np.array([0.3, -1.2])
    assert kernel_eval(KernelSpec("gaussian", gamma=2.0, input_dim=2), x, x) == 1.0
    poly = KernelSpec("polynomial", gamma=1.0, degree=2, input_dim=2)
    assert kernel_eval(poly, [1, 0], [0, 1]) == 1.0


def test_laplacian_uses_l1_distance():
    k = KernelSpec("laplacian", gamma=0.5, input_dim=2)
    assert kernel_eval(k, [0, 0], [1, 1]) == pytest.approx(math.exp(-1.0), abs=1e-15)


def test_dimension_mismatch_rejected():
    k = KernelSpec("gaussian", input_dim=2)
    with pytest.raises(RejectedInput):
        kernel_eval(k, [1, 2, 3], [1, 2])
    with pytest.raises(RejectedInput):
        gram_matrix(k, np.zeros((3, 3)))


@pytest.mark.parametrize("kw", [dict(family="rbf"), dict(family="gaussian", gamma=0.0),
                                dict(family="polynomial", degree=0), dict(family="linear", input_dim=0),
                                dict(family="sigmoid", a=-1.0)])
def test_spec_invariants(kw):
    with pytest.raises(RejectedInput):
        KernelSpec(**kw)


def test_pds_flags():
    assert all(KernelSpec(f).is_pds for f in ("linear", "gaussian", "laplacian", "polynomial"))
    assert not KernelSpec("sigmoid").is_pds


def test_gram_examples():
    assert gram_matrix(KernelSpec("gaussian"), [[0.4]]).tolist() == [[1.0]]
    K = gram_matrix(KernelSpec("linear", input_dim=2), [[1, 0], [1, 0]])
    assert K.tolist() == [[1, 1], [1, 1]]
    assert np.allclose(np.linalg.eigvalsh(K), [0, 2])


@pytest.mark.parametrize("family", FAMILIES)
def test_symmetry_exact(family, rng):
    k = KernelSpec(family, gamma=0.3, input_dim=3)
    X, Y = rng.normal(size=(1000, 3)), rng.normal(size=(1000, 3))
    for a, b in zip(X, Y):
        assert kernel_eval(k, a, b) == kernel_eval(k, b, a)


@pytest.mark.parametrize("k", PDS, ids=lambda k: k.family)
@pytest.mark.parametrize("n", [2, 10, 50])
def test_gram_psd(k, n, rng):
    for scale in (0.1, 1.0, 3.0):
        K = gram_matrix(k, rng.normal(scale=scale, size=(n, 3)))
        assert np.array_equal(K, K.T)
        assert np.linalg.eigvalsh(K).min() >= -1e-8 * np.trace(K)


def test_gram_psd_near_duplicates(rng):
    X = np.repeat(rng.normal(size=(5, 3)), 4, axis=0) + 1e-9 * rng.normal(size=(20, 3))
    for k in PDS:
        K = gram_matrix(k, X)
        assert np.linalg.eigvalsh(K).min() >= -1e-8 * np.trace(K)


def test_growth_examples():
    assert growth_function(KernelSpec("linear"), 0.5) == 0.5
    assert growth_function(KernelSpec("gaussian", gamma=2.0), 1.0) == pytest.approx(2.0, abs=1e-15)
    assert growth_function(KernelSpec("laplacian", gamma=1.0), 0.25) == pytest.approx(math.sqrt(0.5), abs=1e-15)


def test_growth_affine_branch_laplacian():
    k = KernelSpec("laplacian", gamma=1.0)
    assert growth_function(k, 2.0) == pytest.approx(2.5)
    # continuous at the switch point t = gamma sqrt(n) / 2
    assert growth_function(k, 0.5) == pytest.approx(1.0)


def test_polynomial_without_radius_is_uncalm():
    k = KernelSpec("polynomial", degree=3)
    assert growth_profile(k).kind == "uncalm"
    assert growth_function(k, 0.3) == math.inf
    assert growth_profile(k, 2.0).kind == "linear_rate"
    assert growth_profile(KernelSpec("polynomial", degree=1)).kind == "linear_rate"


def test_polynomial_rate_beats_simple_bound():
    # the rate sqrt(2) would fail here: d=2, gamma=1, |x| <= 1 needs sqrt(6)
    assert polynomial_calm_rate(1.0, 2, 1.0) == pytest.approx(math.sqrt(6.0))
    k = KernelSpec("polynomial", gamma=1.0, degree=2)
    x, xp = 1.0, 0.9
    lhs = math.sqrt(kernel_eval(k, x, x) - 2 * kernel_eval(k, x, xp) + kernel_eval(k, xp, xp))
    assert lhs == pytest.approx(math.sqrt(0.0561))
    assert lhs > math.sqrt(2.0) * 0.1
    assert lhs <= growth_function(k, 0.1, domain_radius=1.0)


def test_growth_profile_invariants():
    with pytest.raises(ValueError):
        GrowthProfile("uncalm", (1.0,))
    with pytest.raises(ValueError):
        GrowthProfile("linear_rate", (-1.0,))
    with pytest.raises(RejectedInput):
        growth_function(KernelSpec("linear"), -0.1)


@pytest.mark.parametrize("k", CALM, ids=lambda k: f"{k.family}-{k.gamma}-{k.degree}")
def test_calmness(k, rng):
    radius = 1.5
    X = rng.normal(size=(1000, k.input_dim))
    X *= rng.uniform(0, radius, size=(1000, 1)) / np.linalg.norm(X, axis=1, keepdims=True)
    # mix of nearby and far pairs
    Y = np.where(rng.random((1000, 1)) < 0.5, X + 1e-3 * rng.normal(size=X.shape), rng.normal(size=X.shape))
    Y *= np.minimum(1.0, radius / np.linalg.norm(Y, axis=1, keepdims=True))
    for x, y in zip(X, Y):
        sq = kernel_eval(k, x, x) - 2 * kernel_eval(k, x, y) + kernel_eval(k, y, y)
        lhs = math.sqrt(max(sq, 0.0))
        assert lhs <= growth_function(k, float(np.linalg.norm(x - y)), domain_radius=radius) + 1e-9


@given(st.floats(0, 10), st.floats(0, 10))
def test_growth_nondecreasing_and_zero(a, b):
    for k in CALM:
        lo, hi = sorted((a, b))
        assert growth_function(k, 0.0, 2.0) == 0.0
        assert growth_function(k, lo, 2.0) <= growth_function(k, hi, 2.0)


def test_rkhs_norm_examples():
    g = KernelSpec("gaussian", input_dim=2)
    assert rkhs_norm(g, [[1, 2], [3, 4]], [0, 0]) == 0
    assert rkhs_norm(g, [[1, 2]], [1]) == 1
    assert rkhs_norm(KernelSpec("linear", input_dim=2), [[2, 0]], [3]) == pytest.approx(6.0)
    with pytest.raises(RejectedInput):
        rkhs_norm(g, [[1, 2]], [1, 2])


def test_rkhs_norm_clamps_rounding():
    k = KernelSpec("linear", input_dim=1)
    # exact cancellation; quadratic form is ~0 up to rounding
    assert rkhs_norm(k, [[0.1], [0.1]], [1.0, -1.0]) == 0.0


def test_rkhs_norm_material_negative_raises(monkeypatch):
    import rkhsrobust.kernels as kern

    monkeypatch.setattr(kern, "gram_matrix", lambda spec, P: -np.eye(len(P)))
    with pytest.raises(InternalConsistencyError):
        kern.rkhs_norm(KernelSpec("gaussian"), [[0.0], [1.0]], [1.0, 1.0])


def test_function_eval_examples():
    g = KernelSpec("gaussian", input_dim=2)
    assert function_eval(g, [[0, 1]], [0], [4, 4]) == 0
    assert function_eval(g, [[0, 1]], [1], [0, 1]) == 1
    lin = KernelSpec("linear", input_dim=2)
    assert function_eval(lin, [[1, 0], [0, 1]], [1, 1], [2, 3]) == pytest.approx(5.0)


@given(arrays(float, (6, 2), elements=finite), arrays(float, 6, elements=finite),
       arrays(float, 2, elements=finite))
def test_reproducing_consistency(anchors, coef, x):
    for k in PDS[:3] + [KernelSpec("polynomial", gamma=0.3, degree=2, input_dim=2)]:
        k = KernelSpec(k.family, gamma=k.gamma, degree=k.degree, input_dim=2)
        pts = np.vstack([anchors, x])
        K = gram_matrix(k, pts)
        via_gram = float(coef @ K[:-1, -1])
        got = function_eval(k, anchors, coef, x)
        scale = 1.0 + float(np.abs(coef) @ np.abs(K[:-1, -1]))
        assert abs(got - via_gram) <= 1e-10 * scale
        assert function_values(k, anchors, coef, x[None, :])[0] == pytest.approx(got, rel=1e-12, abs=1e-12)


def test_cross_kernel_matches_pointwise(rng):
    for fam in FAMILIES:
        k = KernelSpec(fam, gamma=0.4, input_dim=2)
        A, B = rng.normal(size=(4, 2)), rng.normal(size=(3, 2))
        C = cross_kernel(k, A, B)
        for i in range(4):
            for j in range(3):
                assert C[i, j] == pytest.approx(kernel_eval(k, A[i], B[j]), rel=1e-13, abs=1e-15)
