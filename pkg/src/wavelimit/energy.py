"""
Lyapunov-type functionals along discrete trajectories and the residuals of
their differential identities.

Time derivatives are central differences over consecutive snapshots, so a
trajectory must be recorded with stride 1. Integrals of ``F`` use the nodal
quadrature of the L2 product. For the first-order IMEX scheme every residual
is O(dt); :func:`identity_ladder` fits that order on a dt ladder.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .dynamics import HyperbolicState, ParabolicState, Trajectory, acceleration, integrate, parabolic_field
from .errors import ConfigurationError
from .nonlinearity import Nonlinearity, linearized_forcing
from .operator import DiscreteOperator, inner_h1, inner_hminus1, inner_l2


def _integral(values, op):
    return op.vol * np.sum(values, axis=0)


def tilde_V(s: HyperbolicState, op: DiscreteOperator, nl: Nonlinearity):
    """``|u|_H1^2 / 2 + eps |v|^2 / 2 - int F(u)``."""
    g = op.grid
    return 0.5 * inner_h1(s.u, s.u, op) + 0.5 * s.eps * inner_l2(s.v, s.v, g) - _integral(nl.F(s.u), op)


def V_lower(v, w, eps: float, op: DiscreteOperator):
    """``|v|^2 / 2 + eps |w|_{H-1}^2 / 2``."""
    return 0.5 * inner_l2(v, v, op.grid) + 0.5 * eps * inner_hminus1(w, w, op)


def check_delta(delta: float, lambda1: float, eps0: float) -> None:
    ok1 = lambda1 - delta > 0
    ok2 = 1 - 2 * delta * eps0 > 0
    if not (delta > 0 and ok1 and ok2):
        raise ConfigurationError(
            f"delta={delta:g} must satisfy lambda_1 - delta > 0 (lambda_1={lambda1:g}: {'ok' if ok1 else 'violated'}) "
            f"and 1 - 2 delta eps_0 > 0 (eps_0={eps0:g}: {'ok' if ok2 else 'violated'})"
        )


def default_delta(lambda1: float, eps0: float) -> float:
    return 0.4 * min(lambda1, 1.0 / (2.0 * eps0))


def F_eps(s: HyperbolicState, delta: float, op: DiscreteOperator, nl: Nonlinearity):
    """``eps |delta u + v|^2 / 2 + |u|_H1^2 / 2 + (-delta + delta^2 eps) |u|^2 / 2 - int F(u)``.

    The gradient and potential parts together are the discrete H1 form.
    """
    g = op.grid
    y = delta * s.u + s.v
    return (
        0.5 * s.eps * inner_l2(y, y, g)
        + 0.5 * inner_h1(s.u, s.u, op)
        + 0.5 * (-delta + delta**2 * s.eps) * inner_l2(s.u, s.u, g)
        - _integral(nl.F(s.u), op)
    )


def F_zero(u, delta: float, op: DiscreteOperator, nl: Nonlinearity):
    """``|u|_H1^2 / 2 - delta |u|^2 / 2 - int F(u)``."""
    return 0.5 * inner_h1(u, u, op) - 0.5 * delta * inner_l2(u, u, op.grid) - _integral(nl.F(u), op)


@dataclass
class EnergyReport:
    functional: str
    times: np.ndarray
    values: np.ndarray
    residuals: np.ndarray  # at times[1:-1]
    dt: float
    extra: dict = field(default_factory=dict)

    @property
    def max_residual(self) -> float:
        return float(np.max(np.abs(self.residuals))) if self.residuals.size else 0.0

    def to_dict(self) -> dict:
        return {
            "functional": self.functional,
            "dt": self.dt,
            "max_residual": self.max_residual,
            "times": self.times.tolist(),
            "values": self.values.tolist(),
            "residuals": self.residuals.tolist(),
            **self.extra,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "functional", "residual"])
        res = np.concatenate([[np.nan], self.residuals, [np.nan]]) if self.values.size >= 2 else np.full(self.values.size, np.nan)
        for t, v, r in zip(self.times, self.values, res):
            w.writerow([repr(float(t)), repr(float(v)), "" if np.isnan(r) else repr(float(r))])
        return buf.getvalue()


def _columns(traj: Trajectory):
    """Snapshots as ``(N, S)`` blocks."""
    if traj.u.ndim != 2:
        raise ConfigurationError("identity residuals need a single (unbatched) trajectory; use Trajectory.member")
    if len(traj) < 3:
        raise ConfigurationError(f"need at least 3 snapshots for central differences, got {len(traj)}")
    steps = np.diff(traj.times)
    if not np.allclose(steps, steps[0], rtol=1e-9, atol=0):
        raise ConfigurationError("snapshots must be uniformly spaced (record with stride 1 and T a multiple of dt)")
    U = traj.u.T
    Vv = traj.v.T if traj.v is not None else None
    return U, Vv, float(steps[0])


def _central(values, h):
    return (values[2:] - values[:-2]) / (2.0 * h)


def tilde_V_identity_residual(traj: Trajectory, op: DiscreteOperator, nl: Nonlinearity) -> EnergyReport:
    """Residual of ``d/dt V~ = -|v|^2`` at interior snapshots."""
    U, Vv, h = _columns(traj)
    vals = tilde_V(HyperbolicState(U, Vv, traj.eps), op, nl)
    res = _central(vals, h) + inner_l2(Vv, Vv, op.grid)[1:-1]
    return EnergyReport("tilde_V", traj.times, vals, res, h)


def V_identity_residual(traj: Trajectory, op: DiscreteOperator, nl: Nonlinearity) -> EnergyReport:
    """Residual of ``d/dt V(v, w) = -|w|_{H-1}^2 + <g, w>_{H-1}``."""
    U, Vv, h = _columns(traj)
    s = HyperbolicState(U, Vv, traj.eps)
    W = acceleration(op, nl, s)
    G = linearized_forcing(nl, U, Vv)
    Ainv_W = op.solve(W)
    vol = op.vol
    ww = vol * np.sum(Ainv_W * W, axis=0)
    gw = vol * np.sum(Ainv_W * G, axis=0)
    vals = 0.5 * inner_l2(Vv, Vv, op.grid) + 0.5 * traj.eps * ww
    res = _central(vals, h) + ww[1:-1] - gw[1:-1]
    return EnergyReport("V", traj.times, vals, res, h)


def F_eps_identity_residual(traj: Trajectory, delta: float, op: DiscreteOperator, nl: Nonlinearity, eps0: Optional[float] = None) -> EnergyReport:
    """Residual of ``F_eps' + 2 delta F_eps = (2 delta eps - 1)|delta u + v|^2 + delta <u, f(u)> - 2 delta int F``."""
    check_delta(delta, op.lambda1, traj.eps if eps0 is None else eps0)
    U, Vv, h = _columns(traj)
    s = HyperbolicState(U, Vv, traj.eps)
    vals = F_eps(s, delta, op, nl)
    y = delta * U + Vv
    rhs = (2 * delta * traj.eps - 1) * inner_l2(y, y, op.grid) + delta * inner_l2(U, nl.f(U), op.grid) - 2 * delta * _integral(nl.F(U), op)
    res = _central(vals, h) + 2 * delta * vals[1:-1] - rhs[1:-1]
    return EnergyReport("F_eps", traj.times, vals, res, h, {"delta": delta})


def F_zero_identity_residual(traj: Trajectory, delta: float, op: DiscreteOperator, nl: Nonlinearity) -> EnergyReport:
    """Residual of ``F_0' + 2 delta F_0 = -|delta u + eta|^2 + delta <u, f(u)> - 2 delta int F`` with ``eta = -A_h u + f(u)``."""
    check_delta(delta, op.lambda1, 0.0)
    U, _, h = _columns(traj)
    vals = F_zero(U, delta, op, nl)
    y = delta * U + parabolic_field(op, nl, U)
    rhs = -inner_l2(y, y, op.grid) + delta * inner_l2(U, nl.f(U), op.grid) - 2 * delta * _integral(nl.F(U), op)
    res = _central(vals, h) + 2 * delta * vals[1:-1] - rhs[1:-1]
    return EnergyReport("F_zero", traj.times, vals, res, h, {"delta": delta})


@dataclass
class LadderFit:
    functional: str
    dts: np.ndarray
    max_residuals: np.ndarray
    order: float
    prefactor: float  # max over the ladder of max_residual / dt
    r2: float
    reports: list
    # residual/dt = c1 + c2 dt by least squares; c1 is the first-order coefficient
    c1: float = float("nan")
    c2: float = float("nan")

    def to_dict(self) -> dict:
        return {
            "functional": self.functional,
            "dts": self.dts.tolist(),
            "max_residuals": self.max_residuals.tolist(),
            "order": self.order,
            "prefactor": self.prefactor,
            "r2": self.r2,
            "c1": self.c1,
            "c2": self.c2,
        }


def fit_order(dts, errors) -> tuple[float, float]:
    """Least-squares slope of ``log(error)`` against ``log(dt)`` and its R^2."""
    x, y = np.log(np.asarray(dts, float)), np.log(np.asarray(errors, float))
    slope, intercept = np.polyfit(x, y, 1)
    pred = slope * x + intercept
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(slope), r2


IDENTITIES = ("tilde_V", "V", "F_eps", "F_zero")


def identity_ladder(
    functional: str,
    op: DiscreteOperator,
    nl: Nonlinearity,
    initial,
    T: float,
    dts: Sequence[float],
    delta: Optional[float] = None,
) -> LadderFit:
    """Integrate ``initial`` for each dt (stride 1) and fit the residual order."""
    if functional not in IDENTITIES:
        raise ConfigurationError(f"unknown functional {functional!r}; choose from {IDENTITIES}")
    hyper = functional != "F_zero"
    if hyper != isinstance(initial, HyperbolicState):
        raise ConfigurationError(f"{functional} needs a {'hyperbolic' if hyper else 'parabolic'} initial state")
    if functional in ("F_eps", "F_zero") and delta is None:
        delta = default_delta(op.lambda1, initial.eps if hyper else 0.5 / op.lambda1)
    reports = []
    for dt in dts:
        traj = integrate(op, nl, initial, T, dt, snapshot_every=1)
        if functional == "tilde_V":
            rep = tilde_V_identity_residual(traj, op, nl)
        elif functional == "V":
            rep = V_identity_residual(traj, op, nl)
        elif functional == "F_eps":
            rep = F_eps_identity_residual(traj, delta, op, nl)
        else:
            rep = F_zero_identity_residual(traj, delta, op, nl)
        reports.append(rep)
    maxres = np.array([r.max_residual for r in reports])
    dts = np.asarray(dts, float)
    order, r2 = fit_order(dts, maxres)
    c2, c1 = np.polyfit(dts, maxres / dts, 1) if dts.size > 1 else (np.nan, maxres[0] / dts[0])
    return LadderFit(functional, dts, maxres, order, float(np.max(maxres / dts)), r2, reports, float(c1), float(c2))


@dataclass
class UniformBoundReport:
    r: float  # sup |u|_H1^2 + eps |v|^2
    S: float  # sup |v|^2 + eps |w|_{H-1}^2
    eps: float
    t_window: tuple

    def to_dict(self) -> dict:
        return {"r": self.r, "S": self.S, "eps": self.eps, "t_window": list(self.t_window)}


def uniform_bound_report(traj: Trajectory, op: DiscreteOperator, nl: Nonlinearity, t_start: float = -np.inf, t_end: float = np.inf) -> UniformBoundReport:
    """Sup of the phase-space energy and of the differentiated energy over a window.

    Ensemble trajectories are pooled over members.
    """
    tr = traj.window(t_start, t_end) if np.isfinite(t_start) or np.isfinite(t_end) else traj
    if tr.flow != "hyperbolic":
        raise ConfigurationError("uniform bound report needs a hyperbolic trajectory")
    N = op.size
    U = np.moveaxis(tr.u, 0, -1).reshape(N, -1)
    Vv = np.moveaxis(tr.v, 0, -1).reshape(N, -1)
    s = HyperbolicState(U, Vv, tr.eps)
    W = acceleration(op, nl, s)
    g = op.grid
    r = inner_h1(U, U, op) + tr.eps * inner_l2(Vv, Vv, g)
    S = inner_l2(Vv, Vv, g) + tr.eps * inner_hminus1(W, W, op)
    return UniformBoundReport(float(np.max(r)), float(np.max(S)), tr.eps, (float(tr.times[0]), float(tr.times[-1])))
