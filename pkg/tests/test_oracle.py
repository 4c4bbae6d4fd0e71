import numpy as np
import pytest

from wavelimit import ConfigurationError, build_grid, build_operator, make_coefficients
from wavelimit.oracle import brute_semidistance, dense_hminus1, dense_linear_solution, loop_assembly_1d

from conftest import sine


def test_identity_at_zero(line32):
    rng = np.random.default_rng(0)
    u0, v0 = rng.standard_normal((2, line32.size))
    u, v = dense_linear_solution(line32, 0.3, (u0, v0), 0.0)
    np.testing.assert_allclose(u, u0, atol=1e-12)
    np.testing.assert_allclose(v, v0, atol=1e-12)


def test_scalar_closed_form():
    # one node: A_h = lam, eps = 1, so u'' + u' + lam u = 0
    g = build_grid(1, 1.0, 1)
    op = build_operator(g, make_coefficients(g))
    lam = op.matrix.toarray()[0, 0]
    r1, r2 = np.roots([1.0, 1.0, lam])
    t = 0.7
    u0, v0 = 1.0, 0.5
    a = (v0 - r2 * u0) / (r1 - r2)
    b = u0 - a
    exact = (a * np.exp(r1 * t) + b * np.exp(r2 * t)).real
    u, _ = dense_linear_solution(op, 1.0, (np.array([u0]), np.array([v0])), t)
    assert u[0] == pytest.approx(exact, rel=1e-12)


def test_group_property(line32):
    z0 = (sine(line32.grid), np.zeros(line32.size))
    a = dense_linear_solution(line32, 0.1, z0, 0.8)
    b = dense_linear_solution(line32, 0.1, dense_linear_solution(line32, 0.1, z0, 0.3), 0.5)
    for x, y in zip(a, b):
        assert np.max(np.abs(x - y)) <= 1e-10


def test_hminus1_oracle():
    g = build_grid(1, (0.0, 1.0), 8)
    op = build_operator(g, make_coefficients(g, beta=1.0))
    assert dense_hminus1(np.zeros(8), op) == 0.0
    u = np.random.default_rng(1).standard_normal(8)
    assert dense_hminus1(op.apply(u), op) == pytest.approx(np.sqrt(op.vol * u @ op.apply(u)), rel=1e-10)


def test_cap_refused(monkeypatch):
    import wavelimit.oracle as oracle

    monkeypatch.setattr(oracle, "DENSE_CAP", 10)
    g = build_grid(1, 1.0, 20)
    op = build_operator(g, make_coefficients(g))
    with pytest.raises(ConfigurationError):
        dense_hminus1(np.ones(20), op)
    with pytest.raises(ConfigurationError):
        dense_linear_solution(op, 0.1, (np.ones(20), np.ones(20)), 1.0)


def test_loop_assembly_rejects_2d():
    with pytest.raises(ConfigurationError):
        loop_assembly_1d(build_grid(2, 1.0, 3), lambda x: 1.0)


def test_brute_semidistance():
    X = [np.array([0.0]), np.array([3.0])]
    Y = [np.array([1.0]), np.array([2.5])]
    d = lambda a, b: float(np.linalg.norm(a - b))
    assert brute_semidistance(X, Y, d) == 1.0
    assert brute_semidistance(Y, X, d) == 1.0
    assert brute_semidistance(X, X, d) == 0.0
