import numpy as np
import pytest

from wavelimit import (
    ConfigurationError,
    DivergenceError,
    HyperbolicState,
    ParabolicState,
    cubic,
    find_equilibrium,
    gamma_lift,
    integrate,
    integrate_ensemble,
    norm_hminus1,
    norm_l2,
    slow_velocity,
    step,
    zero,
)
from wavelimit.dynamics import acceleration, parabolic_field, step_hyperbolic, step_parabolic
from wavelimit.oracle import dense_linear_solution, dense_parabolic_solution

from conftest import sine


def test_rest_state(line32):
    nl = zero(line32.grid)
    z = np.zeros(line32.size)
    s = step_hyperbolic(line32, nl, HyperbolicState(z, z, 0.1), 1e-2)
    assert np.all(s.u == 0) and np.all(s.v == 0)
    assert np.all(step_parabolic(line32, nl, ParabolicState(z), 1e-2).u == 0)


def test_state_validation(line32):
    z = np.zeros(line32.size)
    with pytest.raises(ConfigurationError):
        HyperbolicState(z, z, 0.0)
    with pytest.raises(ConfigurationError):
        step(line32, zero(line32.grid), ParabolicState(z), -1.0)
    with pytest.raises(ConfigurationError):
        integrate(line32, zero(line32.grid), ParabolicState(z), -1.0, 0.1)


def test_linear_oracle_and_first_order(line64):
    nl = zero(line64.grid)
    u0 = sine(line64.grid)
    s0 = HyperbolicState(u0, np.zeros_like(u0), 0.1)
    ref, _ = dense_linear_solution(line64, 0.1, (s0.u, s0.v), 1.0)
    errs = []
    for dt in (1e-4, 2e-4):
        u = integrate(line64, nl, s0, 1.0, dt, snapshot_every=10**9).final.u
        errs.append(norm_l2(u - ref, line64.grid) / norm_l2(ref, line64.grid))
    assert errs[0] <= 1e-3
    assert 1.7 <= errs[1] / errs[0] <= 2.3


def test_parabolic_single_mode(line64):
    nl = zero(line64.grid)
    u0 = sine(line64.grid)
    exact = np.exp(-line64.lambda1) * u0
    errs = [norm_l2(integrate(line64, nl, ParabolicState(u0), 1.0, dt, 10**9).final.u - exact, line64.grid) for dt in (1e-2, 5e-3)]
    np.testing.assert_allclose(dense_parabolic_solution(line64, u0, 1.0), exact, atol=1e-12)
    assert 1.7 <= errs[0] / errs[1] <= 2.3


def test_convergence_to_positive_equilibrium(chafee64):
    op, nl = chafee64
    bump = 0.1 * sine(op.grid) ** 2
    u = integrate(op, nl, ParabolicState(bump), 30.0, 1e-2, 10**9).final.u
    assert np.all(u > 0)
    phi = find_equilibrium(op, nl, u)
    assert np.max(np.abs(op.apply(phi) - nl.f(phi))) <= 1e-6
    assert norm_l2(u - phi, op.grid) < 1e-6


def test_equilibrium_is_fixed(chafee64):
    op, nl = chafee64
    phi = find_equilibrium(op, nl, 1.2 * sine(op.grid))
    s = step_hyperbolic(op, nl, HyperbolicState(phi, 0 * phi, 0.1), 1e-2)
    assert np.max(np.abs(s.u - phi)) < 1e-10 and np.max(np.abs(s.v)) < 1e-9
    np.testing.assert_allclose(acceleration(op, nl, HyperbolicState(phi, 0 * phi, 0.1)), 0, atol=1e-9)
    lifted = gamma_lift(op, nl, phi)
    np.testing.assert_allclose(lifted[1], 0, atol=1e-10)


def test_snapshot_counting(line32):
    nl = zero(line32.grid)
    s0 = ParabolicState(sine(line32.grid))
    assert len(integrate(line32, nl, s0, 0.0, 0.1)) == 1
    tr = integrate(line32, nl, s0, 1.0, 0.1)
    assert len(tr) == 11
    np.testing.assert_allclose(tr.times, np.linspace(0, 1, 11), atol=1e-12)
    tr = integrate(line32, nl, s0, 1.05, 0.1, snapshot_every=3)
    assert tr.times[-1] == 1.05 and list(np.round(tr.times[:4], 12)) == [0.0, 0.3, 0.6, 0.9]


def test_semigroup_bitwise(chafee64):
    op, nl = chafee64
    u0 = 0.5 * sine(op.grid)
    s0 = HyperbolicState(u0, 0 * u0, 0.1)
    dt = 1e-2
    full = integrate(op, nl, s0, 0.6, dt, 10**9).final
    half = integrate(op, nl, integrate(op, nl, s0, 0.3, dt, 10**9).final, 0.3, dt, 10**9).final
    assert np.array_equal(full.u, half.u) and np.array_equal(full.v, half.v)


@pytest.mark.parametrize("eps", [1.0, 1e-1, 1e-2, 1e-3])
def test_eps_robust_stability(line64, eps):
    nl = zero(line64.grid)
    u0 = sine(line64.grid) + 0.3 * sine(line64.grid, 5)
    tr = integrate(line64, nl, HyperbolicState(u0, 0 * u0, eps), 10.0, 1e-3, 1000)
    n = np.array([norm_l2(u, line64.grid) for u in tr.u])
    assert np.all(np.isfinite(n)) and n.max() <= 1.01 * n[0]


def test_singular_limit(chafee64):
    op, nl = chafee64
    u0 = 0.5 * sine(op.grid) + 0.2 * sine(op.grid, 2)
    dt = 1e-3
    target = integrate(op, nl, ParabolicState(u0), 1.0, dt, 10**9).final.u
    _, v0 = gamma_lift(op, nl, u0)
    errs = []
    for eps in (0.1, 0.03, 0.01, 0.003):
        u = integrate(op, nl, HyperbolicState(u0, v0, eps), 1.0, dt, 10**9).final.u
        errs.append(norm_l2(u - target, op.grid))
    assert all(b < a for a, b in zip(errs, errs[1:]))


def test_acceleration_central_difference(chafee64):
    op, nl = chafee64
    u0 = 0.02 * sine(op.grid)
    eps = 0.1
    s0 = HyperbolicState(u0, slow_velocity(op, nl, u0, eps), eps)
    errs = []
    for dt in (2e-3, 1e-3):
        tr = integrate(op, nl, s0, 2.0, dt)
        i = len(tr) // 2
        w = acceleration(op, nl, tr.state(i))
        cd = (tr.v[i + 1] - tr.v[i - 1]) / (2 * dt)
        errs.append(norm_hminus1(w - cd, op))
    # the scheme is first order, so the discrete quotient carries an O(dt) defect
    assert 1.7 <= errs[0] / errs[1] <= 2.3


def test_gamma_lift_linear_and_central_difference(line64, chafee64):
    nl0 = zero(line64.grid)
    u = sine(line64.grid)
    np.testing.assert_array_equal(gamma_lift(line64, nl0, u)[1], -line64.apply(u))
    op, nl = chafee64
    errs = []
    for dt in (2e-3, 1e-3):
        tr = integrate(op, nl, ParabolicState(0.1 * sine(op.grid)), 1.0, dt)
        i = len(tr) // 2
        cd = (tr.u[i + 1] - tr.u[i - 1]) / (2 * dt)
        errs.append(norm_l2(gamma_lift(op, nl, tr.u[i])[1] - cd, op.grid))
    assert 1.7 <= errs[0] / errs[1] <= 2.3
    np.testing.assert_array_equal(parabolic_field(op, nl, u), gamma_lift(op, nl, u)[1])


def test_divergence_reports_last_good(line32):
    nl = cubic(line32.grid, lam=2.0, gamma=1.0)
    u0 = 1e3 * sine(line32.grid)
    with np.errstate(over="ignore", invalid="ignore"):
        with pytest.raises(DivergenceError) as err:
            integrate(line32, nl, ParabolicState(u0), 5.0, 0.5)
    assert err.value.t is not None and err.value.dt == 0.5
    assert err.value.last_good is not None and len(err.value.last_good) >= 1


def test_ensemble_threads_bitwise(chafee64):
    op, nl = chafee64
    rng = np.random.default_rng(0)
    U = 0.1 * rng.standard_normal((op.size, 6))
    s = HyperbolicState(U, 0 * U, 0.05)
    one = integrate_ensemble(op, nl, s, 0.2, 1e-2, 5, threads=1)
    three = integrate_ensemble(op, nl, s, 0.2, 1e-2, 5, threads=3)
    assert np.array_equal(one.u, three.u) and np.array_equal(one.v, three.v)
    single = integrate(op, nl, HyperbolicState(U[:, 2], 0 * U[:, 2], 0.05), 0.2, 1e-2, 5)
    np.testing.assert_allclose(single.u, one.member(2).u, rtol=1e-13, atol=1e-15)


def test_slow_velocity_matches_mode_rate(chafee64):
    op, nl = chafee64
    u0 = 1e-6 * sine(op.grid)
    eps = 0.1
    v0 = slow_velocity(op, nl, u0, eps)
    mu = float(u0 @ op.apply(u0) / (u0 @ u0))
    r = float(v0 @ u0 / (u0 @ u0))
    assert eps * r * r + r + (mu - 2.0) == pytest.approx(0.0, abs=1e-12)
    assert r > 0
