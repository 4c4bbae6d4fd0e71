import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wavelimit import (
    ConfigurationError,
    build_grid,
    build_operator,
    fractional_norm,
    inner_h1,
    inner_l2,
    lambda1,
    make_coefficients,
    norm_hminus1,
    norm_l2,
)
from wavelimit.oracle import dense_eigenvalues, dense_hminus1, loop_assembly_1d

from conftest import sine


def test_three_point_stencil():
    g = build_grid(1, 0.5, 3)
    A = build_operator(g, make_coefficients(g)).matrix.toarray()
    np.testing.assert_allclose(A, [[32, -16, 0], [-16, 32, -16], [0, -16, 32]], rtol=1e-14)


def test_constant_beta_shift():
    g = build_grid(1, 0.5, 3)
    A0 = build_operator(g, make_coefficients(g)).matrix.toarray()
    A1 = build_operator(g, make_coefficients(g, beta=3.0)).matrix.toarray()
    np.testing.assert_allclose(A1 - A0, 3.0 * np.eye(3), atol=1e-13)


def test_variable_coefficient_matches_loop_assembly():
    g = build_grid(1, (0.0, 1.0), 4)
    a = lambda x: 1 + x**2
    A = build_operator(g, make_coefficients(g, a=a)).matrix.toarray()
    np.testing.assert_allclose(A, loop_assembly_1d(g, a), rtol=1e-13)


def test_symmetry(square):
    A = square.matrix
    assert square.asymmetry() <= 1e-12 * abs(A).max()


def test_l2_hand_sum():
    g = build_grid(1, 0.5, 3)
    rng = np.random.default_rng(3)
    u, v = rng.standard_normal(3), rng.standard_normal(3)
    assert inner_l2(u, v, g) == pytest.approx(0.25 * (u[0] * v[0] + u[1] * v[1] + u[2] * v[2]), rel=1e-14)


def test_l2_zero_and_mismatch(line32):
    g = line32.grid
    assert inner_l2(np.zeros(g.size), np.zeros(g.size), g) == 0.0
    with pytest.raises(ValueError):
        inner_l2(np.zeros(g.size), np.zeros(g.size + 1), g)


def _sine_errors(n):
    g = build_grid(1, (0.0, np.pi), n)
    op = build_operator(g, make_coefficients(g))
    s = np.sin(g.coordinates[:, 0])
    return (
        abs(inner_l2(s, s, g) - np.pi / 2),
        abs(inner_h1(s, s, op) - np.pi / 2),
        abs(norm_hminus1(s, op) - np.sqrt(np.pi / 2)),
    )


def test_sine_integrals_second_order():
    coarse, fine = np.array(_sine_errors(50)), np.array(_sine_errors(101))
    # L2 quadrature of sin^2 is exact on this grid; the others converge as h^2
    assert coarse[0] < 1e-13 and fine[0] < 1e-13
    ratios = coarse[1:] / fine[1:]
    assert np.all((ratios > 3.5) & (ratios < 4.5))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_poincare_and_duality(seed):
    g = build_grid(2, [(0.0, 1.0), (0.0, 2.0)], (7, 9))
    op = build_operator(g, make_coefficients(g, a=[[2.0, 0.4], [0.4, 1.0]], beta=0.3))
    rng = np.random.default_rng(seed)
    U = rng.standard_normal((g.size, 50))
    W = rng.standard_normal((g.size, 50))
    lam = op.lambda1
    assert np.all(inner_h1(U, U, op) >= lam * inner_l2(U, U, g) * (1 - 1e-12))
    lhs = np.abs(inner_l2(W, U, g))
    rhs = norm_hminus1(W, op) * np.sqrt(inner_h1(U, U, op))
    assert np.all(lhs <= rhs * (1 + 1e-12))


def test_h1_equals_l2_of_Au(square):
    rng = np.random.default_rng(0)
    u, v = rng.standard_normal((2, square.size))
    assert inner_h1(u, v, square) == inner_l2(square.apply(u), v, square.grid)
    assert inner_h1(u, v, square) == pytest.approx(inner_h1(v, u, square), rel=1e-12)


def test_hminus1_against_dense():
    g = build_grid(1, 1.0, 4)
    op = build_operator(g, make_coefficients(g, a=lambda x: 2 + x))
    w = np.random.default_rng(1).standard_normal(4)
    assert norm_hminus1(w, op) == pytest.approx(dense_hminus1(w, op), rel=1e-10)
    assert norm_hminus1(np.zeros(4), op) == 0.0


def test_hminus1_of_Au_is_h1(square):
    u = np.random.default_rng(2).standard_normal(square.size)
    assert norm_hminus1(square.apply(u), square) == pytest.approx(np.sqrt(inner_h1(u, u, square)), rel=1e-9)


def test_fractional_endpoints(square):
    w = np.random.default_rng(4).standard_normal(square.size)
    assert fractional_norm(w, square, 0.0) == pytest.approx(norm_l2(w, square.grid), rel=1e-12)
    assert fractional_norm(w, square, 1.0) == pytest.approx(norm_hminus1(w, square), rel=1e-8)
    # spectral path at the endpoints agrees with the direct ones
    from wavelimit.operator import _spectral_norm

    assert _spectral_norm(w, square, 1.0) == pytest.approx(norm_hminus1(w, square), rel=1e-8)
    assert _spectral_norm(w, square, 0.0) == pytest.approx(norm_l2(w, square.grid), rel=1e-8)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_fractional_interpolation_and_log_convexity(seed, a, b, t):
    g = build_grid(1, (0.0, np.pi), 16)
    op = build_operator(g, make_coefficients(g))
    w = np.random.default_rng(seed).standard_normal(g.size)
    half = fractional_norm(w, op, 0.5)
    assert half <= np.sqrt(norm_l2(w, g) * norm_hminus1(w, op)) * (1 + 1e-8)
    # log-convexity of alpha -> |A^{-alpha/2} w|^2
    mid = t * a + (1 - t) * b
    lhs = np.log(fractional_norm(w, op, mid))
    rhs = t * np.log(fractional_norm(w, op, a)) + (1 - t) * np.log(fractional_norm(w, op, b))
    assert lhs <= rhs + 1e-10


def test_fractional_monotone_when_lambda1_at_least_one():
    g = build_grid(1, (0.0, 3.0), 20)  # lambda_1 ~ 1.1
    op = build_operator(g, make_coefficients(g))
    assert op.lambda1 >= 1
    w = np.random.default_rng(5).standard_normal(g.size)
    vals = [fractional_norm(w, op, a) for a in np.linspace(0, 1, 11)]
    assert all(x >= y * (1 - 1e-12) for x, y in zip(vals, vals[1:]))


def test_fractional_refused_above_cap():
    g = build_grid(1, 1.0, 40)
    op = build_operator(g, make_coefficients(g), dense_cap=10)
    w = np.ones(40)
    with pytest.raises(ConfigurationError, match="alpha"):
        fractional_norm(w, op, 0.5)
    assert fractional_norm(w, op, 1.0) > 0
    with pytest.raises(ConfigurationError):
        fractional_norm(w, op, 1.5)


def test_cg_path_matches_direct():
    g = build_grid(2, 1.0, (12, 12))
    w = np.random.default_rng(6).standard_normal(g.size)
    direct = build_operator(g, make_coefficients(g, beta=1.0))
    iterative = build_operator(g, make_coefficients(g, beta=1.0), dense_cap=10)
    assert norm_hminus1(w, iterative) == pytest.approx(norm_hminus1(w, direct), rel=1e-9)


def test_lambda1_closed_form():
    g = build_grid(1, (0.0, np.pi), 200)
    op = build_operator(g, make_coefficients(g))
    h = g.spacing[0]
    exact = 4 / h**2 * np.sin(h / 2) ** 2
    assert abs(op.lambda1 - exact) <= 1e-8
    assert abs(op.lambda1 - 1.0) <= 1e-3
    shifted = build_operator(g, make_coefficients(g, beta=2.0))
    assert shifted.lambda1 == pytest.approx(op.lambda1 + 2.0, abs=1e-8)


def test_lambda1_matches_dense(square):
    assert lambda1(square) == pytest.approx(dense_eigenvalues(square)[0], abs=1e-8)
    g = build_grid(1, 1.0, 8)
    op = build_operator(g, make_coefficients(g, a=lambda x: 1 + x**2))
    assert op.lambda1 == pytest.approx(dense_eigenvalues(op)[0], abs=1e-8)


def test_eigh_refused_above_cap():
    g = build_grid(1, 1.0, 20)
    op = build_operator(g, make_coefficients(g), dense_cap=10)
    with pytest.raises(ConfigurationError, match="cap"):
        op.eigh
