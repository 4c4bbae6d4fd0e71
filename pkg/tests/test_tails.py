import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wavelimit import ConfigurationError, HyperbolicState, build_grid, build_operator, integrate, make_coefficients, zero
from wavelimit.cutoff import cutoff_field, ramp
from wavelimit.tails import TailProfile, tail_energy, tail_energy_parts, tail_fit, tail_profile


@pytest.fixture(scope="module")
def wide():
    g = build_grid(1, (-20.0, 20.0), 399)
    return build_operator(g, make_coefficients(g, beta=1.0))


def test_ramp_shape():
    s = np.linspace(0, 3, 301)
    r = ramp(s)
    assert np.all(r[s <= 1] == 0) and np.all(r[s >= 2] == 1)
    assert np.all(np.diff(r) >= 0)


def test_zero_inside_ball(wide):
    g = wide.grid
    inside = np.abs(g.coordinates[:, 0]) <= 3.0
    u = np.where(inside, np.cos(g.coordinates[:, 0]), 0.0)
    s = HyperbolicState(u, u.copy(), 0.1)
    assert tail_energy(s, 3.0, wide) == 0.0
    # support reaching the ramp gives a positive tail
    s2 = HyperbolicState(np.ones(g.size), np.zeros(g.size), 0.1)
    assert tail_energy(s2, 3.0, wide) > 0


def test_k_refused(wide):
    s = HyperbolicState(np.zeros(wide.size), np.zeros(wide.size), 0.1)
    with pytest.raises(ConfigurationError, match="inscribed"):
        tail_energy(s, 15.0, wide)
    with pytest.raises(ConfigurationError):
        cutoff_field(wide.grid, 0.5)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), k1=st.floats(1.0, 6.0), dk=st.floats(0.0, 6.0))
def test_l2_parts_monotone_in_k(wide, seed, k1, dk):
    rng = np.random.default_rng(seed)
    s = HyperbolicState(rng.standard_normal(wide.size), rng.standard_normal(wide.size), 0.3)
    a = tail_energy_parts(s, k1, wide)
    b = tail_energy_parts(s, k1 + dk, wide)
    assert b["kinetic"] <= a["kinetic"] * (1 + 1e-12) + 1e-300
    assert b["potential"] <= a["potential"] * (1 + 1e-12) + 1e-300
    assert a["h1"] >= 0 and a["gradient"] >= -1e-10 * a["h1"]


def test_fit_recovers_synthetic():
    t = np.linspace(0, 30, 1501)
    ks = np.array([2.0, 4.0, 6.0])
    c = np.array([0.5, 0.1, 0.01])
    M = np.array([2.0, 1.0, 0.3])
    vals = c + M * np.exp(-0.4 * t)[:, None]
    fit = tail_fit(TailProfile(t, ks, vals))
    np.testing.assert_allclose(fit.c, c, rtol=1e-2)
    np.testing.assert_allclose(fit.M, M, rtol=1e-2)
    assert fit.rho == pytest.approx(0.4, rel=1e-2)
    assert not fit.degenerate.any()
    assert np.all(vals <= fit.predict(t) + 3 * fit.residual_norms.max() + 1e-12)
    d = json.loads(fit.to_json())
    assert set(d) >= {"c_k", "M_k", "M_prime", "rho", "residual_norms", "degenerate"}


def test_all_zero_column_degenerate():
    t = np.linspace(0, 10, 200)
    vals = np.stack([1 + np.exp(-t), np.zeros_like(t)], axis=1)
    fit = tail_fit(TailProfile(t, np.array([1.0, 5.0]), vals))
    assert list(fit.degenerate) == [False, True]
    assert fit.c[1] == 0 and fit.M[1] == 0


def test_linear_flow_tail_decays(wide):
    g = wide.grid
    x = g.coordinates[:, 0]
    u0 = np.where(np.abs(x) < 3, np.cos(0.5 * np.pi * x / 3) ** 2, 0.0)
    traj = integrate(wide, zero(g), HyperbolicState(u0, np.zeros_like(u0), 0.1), 20.0, 1e-2, 20)
    prof = tail_profile(traj, [1.0, 2.0], wide)
    assert prof.values.shape == (len(traj), 2)
    assert prof.values[-1, 0] < 1e-2 * prof.values[:, 0].max()
    fit = tail_fit(prof)
    assert np.all(fit.c <= 1e-2 * prof.values.max())
    header = prof.to_csv().splitlines()[0]
    assert header == "t,k,value"


def test_profile_rejects_parabolic(wide):
    from wavelimit import ParabolicState

    traj = integrate(wide, zero(wide.grid), ParabolicState(np.zeros(wide.size)), 0.1, 0.05)
    with pytest.raises(ConfigurationError):
        tail_profile(traj, [1.0], wide)
