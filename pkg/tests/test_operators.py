import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from entropy_split.operators import (
    OperatorFormatError,
    build_lgl_1d,
    build_reference_ops,
    export_operators,
    import_operators,
    lagrange_interp_matrix,
    lgl_nodes_weights,
    verify_operators,
)


def test_lgl_p2_nodes_and_weights():
    x, w = lgl_nodes_weights(2)
    np.testing.assert_allclose(x, [-1.0, 0.0, 1.0], atol=1e-15)
    np.testing.assert_allclose(w, [1 / 3, 4 / 3, 1 / 3], rtol=1e-14)


def test_lgl_p3_nodes_and_weights():
    x, w = lgl_nodes_weights(3)
    s = 1 / np.sqrt(5.0)
    np.testing.assert_allclose(x, [-1, -s, s, 1], atol=1e-15)
    np.testing.assert_allclose(w, [1 / 6, 5 / 6, 5 / 6, 1 / 6], rtol=1e-14)


@pytest.mark.parametrize("p", range(1, 11))
def test_lgl_nodes_are_roots_of_legendre_derivative(p):
    x, w = lgl_nodes_weights(p)
    dP = np.polynomial.legendre.Legendre.basis(p).deriv()
    np.testing.assert_allclose(dP(x[1:-1]), 0.0, atol=1e-11)
    assert abs(w.sum() - 2.0) < 1e-13


@pytest.mark.parametrize("p", range(1, 11))
def test_1d_quadrature_degree(p):
    x, w, _ = build_lgl_1d(p)
    for k in range(2 * p):
        exact = (1 - (-1) ** (k + 1)) / (k + 1)
        assert abs(w @ x**k - exact) < 1e-12


@pytest.mark.parametrize("p", range(1, 11))
def test_1d_sbp_property(p):
    x, w, D = build_lgl_1d(p)
    Q = np.diag(w) @ D
    E = np.zeros_like(Q)
    E[0, 0], E[-1, -1] = -1.0, 1.0
    np.testing.assert_allclose(Q + Q.T, E, atol=1e-12)


@pytest.mark.parametrize("d,pmax", [(1, 10), (2, 6), (3, 3)])
def test_reference_operators_verify(d, pmax):
    for p in range(1, pmax + 1):
        rep = verify_operators(build_reference_ops(p, d))
        assert rep.passed, rep.failures()


def test_facets_are_ordered_and_outward():
    ops = build_reference_ops(2, 2)
    labels = [f.label for f in ops.facets]
    assert labels == [-1, 1, -2, 2]
    for f in ops.facets:
        a = abs(f.label) - 1
        np.testing.assert_allclose(ops.nodes[f.nodes, a], np.sign(f.label))
        np.testing.assert_allclose(f.N[a], np.sign(f.label))


@settings(max_examples=30, deadline=None)
@given(p=st.integers(1, 6), seed=st.integers(0, 2**31 - 1))
def test_derivative_exact_for_random_polynomials(p, seed):
    rng = np.random.default_rng(seed)
    ops = build_reference_ops(p, 2)
    c = rng.standard_normal((p + 1, p + 1))
    x, y = ops.nodes[:, 0], ops.nodes[:, 1]
    f = np.polynomial.polynomial.polyval2d(x, y, c)
    fx = np.polynomial.polynomial.polyval2d(x, y, np.polynomial.polynomial.polyder(c, axis=0))
    fy = np.polynomial.polynomial.polyval2d(x, y, np.polynomial.polynomial.polyder(c, axis=1))
    scale = 1 + np.abs(c).sum() * (p + 1)
    np.testing.assert_allclose(ops.D[0] @ f, fx, atol=1e-11 * scale)
    np.testing.assert_allclose(ops.D[1] @ f, fy, atol=1e-11 * scale)


def test_interpolation_reproduces_polynomials():
    x, _, _ = build_lgl_1d(4)
    y = np.linspace(-1, 1, 13)
    I = lagrange_interp_matrix(x, y)
    np.testing.assert_allclose(I @ x**4, y**4, atol=1e-13)


def test_build_rejects_bad_degree():
    with pytest.raises(ValueError):
        build_lgl_1d(0)
    with pytest.raises(ValueError):
        build_lgl_1d(11)


def test_export_import_round_trip(tmp_path):
    ops = build_reference_ops(3, 2)
    path = tmp_path / "ops.txt"
    export_operators(ops, path)
    back = import_operators(path)
    np.testing.assert_array_equal(back.H, ops.H)
    np.testing.assert_array_equal(back.D, ops.D)
    np.testing.assert_array_equal(back.nodes, ops.nodes)
    for f, g in zip(back.facets, ops.facets):
        assert f.label == g.label
        np.testing.assert_array_equal(f.nodes, g.nodes)
        np.testing.assert_array_equal(f.B, g.B)


def test_import_rejects_operator_that_breaks_sbp(tmp_path):
    ops = build_reference_ops(2, 1)
    path = tmp_path / "ops.txt"
    export_operators(ops, path)
    lines = path.read_text().splitlines()
    i = lines.index("H")
    vals = lines[i + 1].split()
    vals[1] = repr(float(vals[1]) * 1.01)
    lines[i + 1] = " ".join(vals)
    path.write_text("\n".join(lines))
    with pytest.raises(OperatorFormatError):
        import_operators(path)


def test_import_rejects_malformed_header(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("sbp two 1 3 2\n")
    with pytest.raises(OperatorFormatError):
        import_operators(path)
