"""
Time stepping for the damped hyperbolic problem and its parabolic limit.

Hyperbolic flow, written as a first-order system::

    u' = v,    eps v' = -v - A_h u + f(u)

One IMEX step treats the linear part implicitly and ``f`` at the old state.
Eliminating ``u+ = u + dt v+`` from the implicit stage gives a single SPD
solve::

    ((eps + dt) I + dt^2 A_h) v+ = eps v + dt (f(u) - A_h u)

As ``eps -> 0`` this collapses to the parabolic step
``(I + dt A_h) u+ = u + dt f(u)``, which is what :func:`step_parabolic` does.

States may carry trailing batch dimensions (ensembles are integrated as
one block of right-hand sides).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional, Union

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConfigurationError, DivergenceError, SolverError
from .nonlinearity import Nonlinearity
from .operator import DiscreteOperator


@dataclass(frozen=True)
class HyperbolicState:
    u: np.ndarray
    v: np.ndarray
    eps: float
    t: float = 0.0

    def __post_init__(self):
        if not self.eps > 0:
            raise ConfigurationError(f"eps must be positive, got {self.eps}")
        if np.shape(self.u) != np.shape(self.v):
            raise ValueError(f"u and v shapes differ: {np.shape(self.u)} vs {np.shape(self.v)}")


@dataclass(frozen=True)
class ParabolicState:
    u: np.ndarray
    t: float = 0.0


State = Union[HyperbolicState, ParabolicState]


@dataclass
class Trajectory:
    """Snapshots ``u[i]`` (and ``v[i]`` for the hyperbolic flow) at ``times[i]``.

    Field arrays have shape ``(S, N)`` or ``(S, N, K)`` for ensembles.
    """

    flow: str
    times: np.ndarray
    u: np.ndarray
    v: Optional[np.ndarray]
    dt: float
    eps: float
    grid_hash: str
    stride: int = 1
    integrator: str = "imex-euler"

    def __len__(self) -> int:
        return len(self.times)

    def state(self, i: int) -> State:
        if self.flow == "hyperbolic":
            return HyperbolicState(self.u[i], self.v[i], self.eps, float(self.times[i]))
        return ParabolicState(self.u[i], float(self.times[i]))

    @property
    def final(self) -> State:
        return self.state(-1)

    def member(self, k: int) -> "Trajectory":
        """One ensemble member as an unbatched trajectory."""
        return replace(self, u=self.u[..., k], v=None if self.v is None else self.v[..., k])

    def window(self, t_start: float, t_end: float = np.inf) -> "Trajectory":
        keep = (self.times >= t_start - 1e-12) & (self.times <= t_end + 1e-12)
        return replace(self, times=self.times[keep], u=self.u[keep], v=None if self.v is None else self.v[keep])


def _check_finite(arrays, t, dt):
    for a in arrays:
        ok = np.isfinite(a)
        if not np.all(ok):
            cols = np.flatnonzero(~np.all(ok, axis=0)) if a.ndim == 2 else None
            raise DivergenceError(f"non-finite field values after step to t={t:.6g} (dt={dt:g})", t=t, dt=dt, columns=cols)


def step_hyperbolic(op: DiscreteOperator, nl: Nonlinearity, s: HyperbolicState, dt: float) -> HyperbolicState:
    if not dt > 0:
        raise ConfigurationError(f"dt must be positive, got {dt}")
    eps = s.eps
    solve = op.shifted_solver(eps + dt, dt * dt)
    rhs = eps * s.v + dt * (nl.f(s.u) - op.apply(s.u))
    v_new = solve(rhs)
    u_new = s.u + dt * v_new
    t_new = s.t + dt
    _check_finite((u_new, v_new), t_new, dt)
    return HyperbolicState(u_new, v_new, eps, t_new)


def step_parabolic(op: DiscreteOperator, nl: Nonlinearity, s: ParabolicState, dt: float) -> ParabolicState:
    if not dt > 0:
        raise ConfigurationError(f"dt must be positive, got {dt}")
    solve = op.shifted_solver(1.0, dt)
    u_new = solve(s.u + dt * nl.f(s.u))
    t_new = s.t + dt
    _check_finite((u_new,), t_new, dt)
    return ParabolicState(u_new, t_new)


def step(op, nl, s: State, dt: float) -> State:
    if isinstance(s, HyperbolicState):
        return step_hyperbolic(op, nl, s, dt)
    return step_parabolic(op, nl, s, dt)


def _step_count(T: float, dt: float) -> tuple[int, float]:
    """Number of steps and the length of the last one."""
    if T == 0:
        return 0, dt
    n = math.ceil(T / dt - 1e-9)
    last = T - (n - 1) * dt
    if abs(last - dt) <= 1e-9 * dt:
        last = dt
    return n, last


def integrate(op: DiscreteOperator, nl: Nonlinearity, state: State, T: float, dt: float, snapshot_every: int = 1) -> Trajectory:
    """Advance ``state`` by ``T`` with ``ceil(T/dt)`` steps.

    Snapshots are taken every ``snapshot_every`` steps and always at the
    start and the end; if ``T`` is not a multiple of ``dt`` the last step is
    shortened to land on ``t0 + T``.
    """
    if T < 0:
        raise ConfigurationError(f"T must be nonnegative, got {T}")
    if not dt > 0:
        raise ConfigurationError(f"dt must be positive, got {dt}")
    if snapshot_every < 1:
        raise ConfigurationError(f"snapshot stride must be >= 1, got {snapshot_every}")
    hyper = isinstance(state, HyperbolicState)
    n, last = _step_count(T, dt)
    t0 = state.t
    times, us, vs = [t0], [np.array(state.u, copy=True)], [np.array(state.v, copy=True)] if hyper else None
    s = state
    for k in range(1, n + 1):
        h = last if k == n else dt
        try:
            s = step(op, nl, s, h)
        except DivergenceError as err:
            err.last_good = _trajectory(hyper, times, us, vs, dt, state, op, snapshot_every)
            raise
        if k % snapshot_every == 0 or k == n:
            tk = t0 + T if k == n else t0 + k * dt
            times.append(tk)
            us.append(s.u)
            if hyper:
                vs.append(s.v)
    return _trajectory(hyper, times, us, vs, dt, state, op, snapshot_every)


def _trajectory(hyper, times, us, vs, dt, state, op, stride):
    return Trajectory(
        flow="hyperbolic" if hyper else "parabolic",
        times=np.asarray(times, dtype=float),
        u=np.stack(us),
        v=np.stack(vs) if hyper else None,
        dt=dt,
        eps=state.eps if hyper else 0.0,
        grid_hash=op.grid.hash,
        stride=stride,
    )


def integrate_ensemble(op, nl, state: State, T: float, dt: float, snapshot_every: int = 1, threads: int = 1) -> Trajectory:
    """Integrate a batched state, splitting the members over ``threads`` workers."""
    K = np.shape(state.u)[-1] if np.ndim(state.u) > 1 else 1
    if threads <= 1 or K == 1:
        return integrate(op, nl, state, T, dt, snapshot_every)
    chunks = np.array_split(np.arange(K), min(threads, K))

    def run(idx):
        if isinstance(state, HyperbolicState):
            sub = HyperbolicState(state.u[:, idx], state.v[:, idx], state.eps, state.t)
        else:
            sub = ParabolicState(state.u[:, idx], state.t)
        return integrate(op, nl, sub, T, dt, snapshot_every)

    with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
        parts = list(pool.map(run, chunks))
    first = parts[0]
    return replace(
        first,
        u=np.concatenate([p.u for p in parts], axis=-1),
        v=None if first.v is None else np.concatenate([p.v for p in parts], axis=-1),
    )


def acceleration(op: DiscreteOperator, nl: Nonlinearity, s: HyperbolicState) -> np.ndarray:
    """``w = (-v - A_h u + f(u)) / eps``, the time derivative of v."""
    return (-s.v - op.apply(s.u) + nl.f(s.u)) / s.eps


def parabolic_field(op: DiscreteOperator, nl: Nonlinearity, u: np.ndarray) -> np.ndarray:
    """``-A_h u + f(u)``, the right-hand side of the parabolic flow."""
    return -op.apply(u) + nl.f(u)


def gamma_lift(op: DiscreteOperator, nl: Nonlinearity, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Pair a parabolic state with its own time derivative: ``(u, -A_h u + f(u))``."""
    return u, parabolic_field(op, nl, u)


def find_equilibrium(op: DiscreteOperator, nl: Nonlinearity, guess: np.ndarray, tol: float = 1e-12, maxiter: int = 50) -> np.ndarray:
    """Newton iteration for ``A_h u = f(u)`` from ``guess``.

    Converges to whichever equilibrium attracts the guess under Newton; the
    caller checks which one it got.
    """
    u = np.array(guess, dtype=float)
    for _ in range(maxiter):
        r = op.apply(u) - nl.f(u)
        rn = np.linalg.norm(r)
        if rn <= tol * max(1.0, np.linalg.norm(u)):
            return u
        J = (op.matrix - sp.diags(nl.dfu(u))).tocsc()
        u = u - spla.spsolve(J, r)
    raise SolverError(f"Newton did not converge (residual {rn:.3e})", rn)


def slow_velocity(op: DiscreteOperator, nl: Nonlinearity, u0: np.ndarray, eps: float) -> np.ndarray:
    """Initial velocity that suppresses the fast ``exp(-t/eps)`` layer along ``u0``.

    With ``q`` the Rayleigh quotient of ``A_h - f'(0)`` at ``u0``, the
    linearisation restricted to the direction of ``u0`` has rates solving
    ``eps r^2 + r + q = 0``; the slow root is returned as ``r u0``. Exact
    when ``u0`` is an eigenvector and ``f'(0)`` is constant.
    """
    if not eps > 0:
        raise ConfigurationError(f"eps must be positive, got {eps}")
    u0 = np.asarray(u0, float)
    uu = float(u0 @ u0)
    if uu == 0:
        return np.zeros_like(u0)
    q = (float(u0 @ op.apply(u0)) - float(u0 @ (nl.dfu(np.zeros_like(u0)) * u0))) / uu
    r = (-1.0 + math.sqrt(1.0 - 4.0 * eps * q)) / (2.0 * eps) if 1.0 - 4.0 * eps * q >= 0 else -1.0 / (2.0 * eps)
    return r * u0
