"""
Energy outside a ball, and fits of its time profile to ``c_k + M exp(-rho t)``.

``tail_energy`` applies the global H1 form to the cut-off field, so the
gradient of the cutoff itself contributes. The parts that are pure L2
quantities (kinetic and potential) are monotone in k nodewise; the gradient
part is reported separately.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize

from .cutoff import cutoff_field
from .dynamics import HyperbolicState, Trajectory
from .errors import ConfigurationError
from .operator import DiscreteOperator, inner_h1, inner_l2


def _check_k(op: DiscreteOperator, k: float):
    reach = np.sqrt(2.0) * k
    if reach > op.grid.inscribed_radius():
        raise ConfigurationError(
            f"k={k}: sqrt(2) k = {reach:.4g} exceeds the box inscribed radius {op.grid.inscribed_radius():.4g}"
        )


def tail_energy_parts(s: HyperbolicState, k: float, op: DiscreteOperator) -> dict:
    """``|theta_k u|_H1^2`` split into gradient and potential parts, plus ``eps |theta_k v|^2``."""
    _check_k(op, k)
    theta = cutoff_field(op.grid, k).theta
    th = theta.reshape(theta.shape + (1,) * (np.ndim(s.u) - 1))
    tu, tv = th * s.u, th * s.v
    g = op.grid
    beta = op.coeffs.beta.reshape(theta.shape + (1,) * (np.ndim(s.u) - 1))
    h1 = inner_h1(tu, tu, op)
    potential = inner_l2(beta * tu, tu, g)
    return {
        "h1": h1,
        "gradient": h1 - potential,
        "potential": potential,
        "kinetic": s.eps * inner_l2(tv, tv, g),
    }


def tail_energy(s: HyperbolicState, k: float, op: DiscreteOperator):
    """``|theta_k u|_H1^2 + eps |theta_k v|_L2^2``."""
    p = tail_energy_parts(s, k, op)
    return p["h1"] + p["kinetic"]


@dataclass
class TailProfile:
    times: np.ndarray
    ks: np.ndarray
    values: np.ndarray  # shape (len(times), len(ks))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "k", "value"])
        for i, t in enumerate(self.times):
            for j, k in enumerate(self.ks):
                w.writerow([repr(float(t)), repr(float(k)), repr(float(self.values[i, j]))])
        return buf.getvalue()


def tail_profile(traj: Trajectory, ks, op: DiscreteOperator) -> TailProfile:
    if traj.flow != "hyperbolic":
        raise ConfigurationError("tail profiles are defined for hyperbolic trajectories")
    ks = np.asarray(ks, dtype=float)
    for k in ks:
        _check_k(op, k)
    U = np.moveaxis(traj.u, 0, -1)
    Vv = np.moveaxis(traj.v, 0, -1)
    s = HyperbolicState(U, Vv, traj.eps)
    # ensemble members are summed so the profile stays a (t, k) table
    cols = [np.asarray(tail_energy(s, k, op)) for k in ks]
    vals = np.column_stack([c.reshape(-1, c.shape[-1]).sum(axis=0) for c in cols])
    return TailProfile(np.asarray(traj.times, float), ks, vals)


@dataclass
class TailFit:
    c: np.ndarray  # per column
    M: np.ndarray  # per column
    M_prime: float  # max over columns
    rho: float
    residual_norms: np.ndarray
    degenerate: np.ndarray
    t_used: np.ndarray = field(repr=False)

    def predict(self, t) -> np.ndarray:
        t = np.asarray(t, float)[:, None]
        return self.c[None, :] + self.M[None, :] * np.exp(-self.rho * t)

    def to_dict(self) -> dict:
        return {
            "c_k": self.c.tolist(),
            "M_k": self.M.tolist(),
            "M_prime": self.M_prime,
            "rho": self.rho,
            "residual_norms": self.residual_norms.tolist(),
            "degenerate": self.degenerate.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _sample_times(times: np.ndarray, n_samples: int, discard: float) -> np.ndarray:
    """Indices of log-spaced sample times after dropping the first ``discard`` fraction of the window."""
    t0, t1 = times[0], times[-1]
    start = t0 + discard * (t1 - t0)
    cand = np.nonzero(times >= start - 1e-12)[0]
    if start <= 0:
        start = times[cand[1]] if cand.size > 1 else times[cand[0]]
    targets = np.geomspace(max(start, 1e-12), t1, n_samples)
    idx = np.unique(np.searchsorted(times, targets).clip(cand[0], times.size - 1))
    return idx


def _nnls_columns(E, Y):
    coefs = np.empty((2, Y.shape[1]))
    res = np.empty(Y.shape[1])
    basis = np.column_stack([np.ones_like(E), E])
    for j in range(Y.shape[1]):
        coefs[:, j], res[j] = scipy.optimize.nnls(basis, Y[:, j])
    return coefs, res


def tail_fit(profile: TailProfile, n_samples: int = 64, discard: float = 0.1, rho_bounds=(1e-4, 1e3)) -> TailFit:
    """Joint fit of every column to ``c_k + M_k exp(-rho t)`` with a shared rho.

    For fixed rho each column is a two-term nonnegative least-squares problem;
    rho is found by a log-scale grid search refined with a bounded scalar
    minimisation of the total squared residual.
    """
    times, Y = profile.times, profile.values
    if times.size < 5:
        raise ConfigurationError(f"tail fit needs at least 5 time samples, got {times.size}")
    idx = _sample_times(times, n_samples, discard)
    t, Ys = times[idx], Y[idx]
    degenerate = np.all(Ys == 0, axis=0)
    live = ~degenerate
    c = np.zeros(Y.shape[1])
    M = np.zeros(Y.shape[1])
    res = np.zeros(Y.shape[1])
    if not np.any(live):
        return TailFit(c, M, 0.0, float("nan"), res, degenerate, t)
    Yl = Ys[:, live]
    scale = np.max(np.abs(Yl), axis=0)
    Yn = Yl / scale

    def objective(log_rho):
        _, r = _nnls_columns(np.exp(-np.exp(log_rho) * t), Yn)
        return float(np.sum(r**2))

    lo, hi = np.log(rho_bounds[0]), np.log(rho_bounds[1])
    grid = np.linspace(lo, hi, 121)
    vals = [objective(x) for x in grid]
    i = int(np.argmin(vals))
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    opt = scipy.optimize.minimize_scalar(objective, bounds=(a, b), method="bounded", options={"xatol": 1e-12})
    rho = float(np.exp(opt.x))
    coefs, r = _nnls_columns(np.exp(-rho * t), Yn)
    c[live] = coefs[0] * scale
    M[live] = coefs[1] * scale
    res[live] = r * scale
    return TailFit(c, M, float(M.max()), rho, res, degenerate, t)
