"""Basis, quadrature and triple-product tensor."""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.polynomial import legendre as npleg
from scipy.special import eval_legendre

from mzr.basis import (
    MultiIndex,
    TripleProductTensor,
    basis_matrix,
    evaluate,
    gauss_legendre,
    legendre_1d,
    legendre_eval,
    multi_index_set,
    project,
    snap,
    triple_product_tensor,
)


def test_multi_index_set_1d_example():
    s = multi_index_set(1, 3, 1)
    assert [ix.degrees for ix in s.indices] == [(0,), (1,), (2,), (3,)]
    assert s.n_resolved == 2
    assert s.size - s.n_resolved == 2


def test_multi_index_set_2d_order():
    s = multi_index_set(2, 2, 1)
    assert [ix.degrees for ix in s.indices] == [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]
    assert s.axis_index(1, 1) == 2


def test_multi_index_rejects_negative():
    with pytest.raises(ValueError):
        MultiIndex((1, -1))
    with pytest.raises(ValueError):
        multi_index_set(2, 2, 3)


@given(st.integers(1, 3), st.integers(0, 6), st.data())
def test_resolved_set_is_prefix(d, p, data):
    p_r = data.draw(st.integers(0, p))
    s = multi_index_set(d, p, p_r)
    totals = [ix.total for ix in s.indices]
    assert len(set(s.indices)) == s.size == math.comb(p + d, d)
    assert all(t <= p_r for t in totals[: s.n_resolved])
    assert all(t > p_r for t in totals[s.n_resolved:])
    assert totals == sorted(totals)


def test_legendre_eval_examples():
    assert legendre_eval(MultiIndex((0,)), [0.3]) == 1.0
    assert legendre_eval((1,), [0.5]) == pytest.approx(0.8660254037844386, rel=1e-15)
    assert legendre_eval((2,), [1.0]) == pytest.approx(2.23606797749979, rel=1e-15)


@given(st.integers(0, 15), st.floats(-1.0, 1.0))
def test_legendre_matches_scipy(n, x):
    ref = math.sqrt(2 * n + 1) * eval_legendre(n, x)
    assert legendre_1d(n, np.array([x]))[n, 0] == pytest.approx(ref, rel=1e-12, abs=1e-12)


def test_legendre_eval_shape_check():
    with pytest.raises(ValueError):
        legendre_eval((1, 1), [0.2])


@pytest.mark.parametrize("d,p", [(1, 7), (2, 4), (3, 3)])
def test_basis_is_orthonormal(d, p):
    s = multi_index_set(d, p)
    rule = gauss_legendre(d, p + 1)
    V = basis_matrix(s, rule.points)
    gram = V.T @ (rule.weights[:, None] * V)
    np.testing.assert_allclose(gram, np.eye(s.size), atol=1e-13)


@pytest.mark.parametrize("n", [1, 4, 9])
def test_quadrature_weights_and_exactness(n):
    rule = gauss_legendre(2, n)
    assert rule.weights.sum() == pytest.approx(1.0, abs=1e-14)
    assert rule.weights_1d.sum() == pytest.approx(1.0, abs=1e-14)
    deg = rule.exact_degree
    x = rule.nodes_1d
    # E[x^deg] with even degree is 1/(deg+1); odd vanishes
    k = deg - 1 if deg % 2 else deg
    assert np.sum(rule.weights_1d * x**k) == pytest.approx(1.0 / (k + 1), rel=1e-12)


def _e1_oracle(a, b, c):
    # exact integral of products of Legendre series via numpy polynomial algebra
    prod = npleg.legmul(npleg.legmul(np.eye(a + 1)[a], np.eye(b + 1)[b]), np.eye(c + 1)[c])
    anti = npleg.legint(prod)
    val = npleg.legval(1.0, anti) - npleg.legval(-1.0, anti)
    return 0.5 * val * math.sqrt((2 * a + 1) * (2 * b + 1) * (2 * c + 1))


def test_e112_value():
    t = triple_product_tensor(1, 2)
    assert t[1, 1, 2] == pytest.approx(0.8944271909999159, rel=1e-14)
    assert t[2, 1, 1] == t[1, 1, 2]


def test_tensor_against_polynomial_oracle():
    t = triple_product_tensor(1, 5)
    for a in range(6):
        for b in range(6):
            for c in range(6):
                assert t.dense[a, b, c] == pytest.approx(_e1_oracle(a, b, c), abs=1e-13)


@pytest.mark.parametrize("d,p", [(1, 7), (2, 4), (3, 3)])
def test_tensor_symmetry_and_identity(d, p):
    t = triple_product_tensor(d, p)
    E = t.dense
    for perm in [(0, 2, 1), (1, 0, 2), (2, 1, 0), (1, 2, 0)]:
        assert np.array_equal(E, E.transpose(perm))
    np.testing.assert_allclose(E[:, :, 0], np.eye(t.size), atol=1e-14)
    for (i, j, k), v in t.entries.items():
        assert i <= j <= k
        assert t[k, i, j] == v
        assert abs(v) >= 1e-14


def test_tensor_rejects_insufficient_rule():
    s = multi_index_set(1, 5)
    with pytest.raises(ValueError, match="exact to degree"):
        TripleProductTensor(s, gauss_legendre(1, 7))
    TripleProductTensor(s, gauss_legendre(1, 8))


def test_tensor_rejects_dimension_mismatch():
    with pytest.raises(ValueError):
        TripleProductTensor(multi_index_set(2, 2), gauss_legendre(1, 10))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_bilinear_matches_dense_and_quadrature(seed):
    rng = np.random.default_rng(seed)
    for d, p in [(1, 4), (2, 5)]:  # (2, 5) has 21 modes and uses the sparse path
        t = triple_product_tensor(d, p)
        a, b = rng.standard_normal((2, 3, t.size))
        got = t.bilinear(a, b)
        want = np.einsum("...i,...j,ijk->...k", a, b, t.dense)
        np.testing.assert_allclose(got, want, atol=1e-12)
        # pseudo-spectral product of the truncated fields (exact for degree 3p)
        rule = gauss_legendre(d, p * 3 // 2 + 1)
        V = basis_matrix(t.iset, rule.points)
        prod = (a @ V.T) * (b @ V.T)
        np.testing.assert_allclose(got, (prod * rule.weights) @ V, atol=1e-11)


def test_trilinear_symmetry():
    rng = np.random.default_rng(3)
    t = triple_product_tensor(2, 3)
    f, g, h = rng.standard_normal((3, t.size))
    v = t.trilinear(f, g, h)
    assert v == pytest.approx(t.trilinear(h, f, g), rel=1e-13)
    assert v == pytest.approx(t.trilinear(g, h, f), rel=1e-13)


def test_project_linear_function():
    s = multi_index_set(1, 3)
    c = project(s, lambda x: x[:, 0])
    assert c[1] == pytest.approx(0.5773502691896258, rel=1e-15)
    assert c[0] == c[2] == c[3] == 0.0


def test_project_evaluate_roundtrip():
    s = multi_index_set(2, 4)
    f = lambda x: 1 + x[:, 0] ** 3 - 2 * x[:, 0] * x[:, 1] ** 2  # noqa: E731
    c = project(s, f)
    pts = np.array([[0.1, -0.7], [0.9, 0.3], [-1.0, 1.0]])
    np.testing.assert_allclose(evaluate(s, c, pts), f(pts), atol=1e-13)


def test_snap():
    out = snap(np.array([[1.0, 1e-17, -3e-15], [0.0, 0.0, 0.0]]))
    assert np.array_equal(out, [[1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
