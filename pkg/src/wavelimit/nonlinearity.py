"""
Nonlinearities ``f(x, u)`` with their antiderivative and u-derivative, plus
audits of the dissipativity hypotheses and the Nemitski growth inequalities.

Two families are provided:

* :class:`CubicNonlinearity`: ``f = lam(x) u - gamma(x) u^3 + g(x)``, the
  critical-growth case in three dimensions;
* :class:`TabulatedNonlinearity`: a spatially uniform ``f(u)`` given by a
  table and interpolated with a cubic spline. Its antiderivative and
  derivative are those of the spline, hence exact for the interpolant.

Discrete Lebesgue norms use the same nodal quadrature as the L2 product,
``|u|_s = (vol * sum |u|^s)^(1/s)``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.optimize
from scipy.interpolate import CubicSpline

from .errors import AuditFailure, ConfigurationError
from .grid import Grid
from .operator import DiscreteOperator, inner_h1, norm_h1, norm_hminus1


def _field(grid: Grid, value) -> np.ndarray:
    if callable(value):
        return grid.sample(value)
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return np.full(grid.size, float(arr))
    if arr.shape != (grid.size,):
        raise ConfigurationError(f"parameter field has shape {arr.shape}, expected ({grid.size},)")
    return arr.copy()


def _bc(p: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Broadcast a nodal parameter against a possibly batched field."""
    return p.reshape(p.shape + (1,) * (np.ndim(u) - 1))


def lp_norm(u: np.ndarray, grid: Grid, s: float):
    return (grid.cell_volume * np.sum(np.abs(u) ** s, axis=0)) ** (1.0 / s)


class Nonlinearity:
    """Common interface. Subclasses provide ``f``, ``F``, ``dfu``, ``d2fu``."""

    grid: Grid
    mu_bar: float
    c: np.ndarray

    def f(self, u):
        raise NotImplementedError

    def F(self, u):
        raise NotImplementedError

    def dfu(self, u):
        raise NotImplementedError

    def d2fu(self, u):
        raise NotImplementedError

    @property
    def C_bar(self) -> float:
        """Constant with ``|d2f/du2 (x, u)| <= C_bar (1 + |u|)``."""
        raise NotImplementedError

    @property
    def C(self) -> float:
        """Constant of the pointwise growth bounds on ``df/du`` and its increments."""
        return float(np.max(np.abs(self.dfu(np.zeros(self.grid.size))))) + self.C_bar

    @property
    def nemitski_constant(self) -> float:
        """Constant valid for all six Nemitski inequalities (with ``C(r) = K max(C2, C6)``)."""
        return 2.0 * self.C

    def describe(self) -> dict:
        return {"family": type(self).__name__, "mu_bar": self.mu_bar, "C_bar": self.C_bar, "C": self.C}


@dataclass(eq=False)
class CubicNonlinearity(Nonlinearity):
    grid: Grid
    lam: np.ndarray
    gamma: np.ndarray
    g: np.ndarray
    mu_bar: float
    c: np.ndarray

    def f(self, u):
        lam, gam, g = (_bc(p, u) for p in (self.lam, self.gamma, self.g))
        return lam * u - gam * u**3 + g

    def F(self, u):
        lam, gam, g = (_bc(p, u) for p in (self.lam, self.gamma, self.g))
        u2 = u * u
        return g * u + 0.5 * lam * u2 - 0.25 * gam * u2 * u2

    def dfu(self, u):
        lam, gam = _bc(self.lam, u), _bc(self.gamma, u)
        return lam - 3.0 * gam * u * u

    def d2fu(self, u):
        return -6.0 * _bc(self.gamma, u) * u

    @property
    def C_bar(self) -> float:
        return 6.0 * float(np.max(np.abs(self.gamma)))

    @property
    def C(self) -> float:
        # |lam - 3 gam u^2| <= max(|lam|, 3|gam|)(1 + u^2); the increment bound needs 6|gam|
        return max(float(np.max(np.abs(self.lam))), 6.0 * float(np.max(np.abs(self.gamma))))

    @property
    def nemitski_constant(self) -> float:
        # the cubic's Hoelder bookkeeping needs at most 4.5|gam| and |lam|, both below C
        return self.C

    @property
    def is_zero(self) -> bool:
        return not (np.any(self.lam) or np.any(self.gamma) or np.any(self.g))


def cubic(grid: Grid, lam=2.0, gamma=1.0, g=0.0, mu_bar=4.0, c=None) -> CubicNonlinearity:
    """Cubic family on ``grid``. Parameters may be scalars, nodal arrays or callables.

    When ``c`` is omitted and ``g == 0``, ``c = max(lam, 0)^2 / (4 gamma)``,
    the supremum of ``F`` in u (zero where ``gamma == 0`` and ``lam <= 0``).
    """
    lam_f, gam_f, g_f = _field(grid, lam), _field(grid, gamma), _field(grid, g)
    if np.any(gam_f < 0):
        raise ConfigurationError("gamma must be nonnegative")
    if not mu_bar > 0:
        raise ConfigurationError(f"mu_bar must be positive, got {mu_bar}")
    if c is None:
        if np.any(g_f):
            raise ConfigurationError("dissipativity bound c must be supplied when g is nonzero")
        lp = np.maximum(lam_f, 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            c_f = np.where(gam_f > 0, lp**2 / (4.0 * np.where(gam_f > 0, gam_f, 1.0)), np.where(lp > 0, np.inf, 0.0))
        if np.any(~np.isfinite(c_f)):
            raise ConfigurationError("F is unbounded above (lam > 0 with gamma = 0); supply c explicitly")
    else:
        c_f = _field(grid, c)
    return CubicNonlinearity(grid, lam_f, gam_f, g_f, float(mu_bar), c_f)


def zero(grid: Grid) -> CubicNonlinearity:
    return cubic(grid, lam=0.0, gamma=0.0, g=0.0, mu_bar=1.0, c=0.0)


@dataclass(eq=False)
class TabulatedNonlinearity(Nonlinearity):
    grid: Grid
    u_table: np.ndarray
    f_table: np.ndarray
    mu_bar: float
    c: np.ndarray
    _spline: CubicSpline = field(init=False, repr=False)

    def __post_init__(self):
        if np.any(np.diff(self.u_table) <= 0):
            raise ConfigurationError("u_table must be strictly increasing")
        self._spline = CubicSpline(self.u_table, self.f_table)
        self._anti = self._spline.antiderivative()
        self._F0 = float(self._anti(0.0))
        self._d1 = self._spline.derivative()
        self._d2 = self._spline.derivative(2)

    def f(self, u):
        return self._spline(u)

    def F(self, u):
        return self._anti(u) - self._F0

    def dfu(self, u):
        return self._d1(u)

    def d2fu(self, u):
        return self._d2(u)

    @property
    def C_bar(self) -> float:
        # piecewise-linear second derivative: on each piece the ratio to (1+|u|)
        # is monotone, so knots, u=0 and the slopes of the extrapolated end
        # pieces (the limit at infinity) bound it
        knots = np.concatenate([self.u_table, [0.0]])
        inner = np.max(np.abs(self._d2(knots)) / (1.0 + np.abs(knots)))
        d3 = self._spline.derivative(3)
        ends = np.abs(d3([self.u_table[0], self.u_table[-1]]))
        return float(max(inner, ends.max()))


def tabulated(grid: Grid, u_table, f_table, mu_bar: float, c) -> TabulatedNonlinearity:
    return TabulatedNonlinearity(grid, np.asarray(u_table, float), np.asarray(f_table, float), float(mu_bar), _field(grid, c))


def eval_f(nl: Nonlinearity, u):
    return nl.f(u)


def eval_F(nl: Nonlinearity, u):
    return nl.F(u)


def eval_dfu(nl: Nonlinearity, u):
    return nl.dfu(u)


def linearized_forcing(nl: Nonlinearity, u, v):
    """Nodewise ``df/du(x, u(x)) * v(x)``, the time derivative of ``f(u(t))``."""
    return nl.dfu(u) * v


# ---------------------------------------------------------------- audits


@dataclass
class DissipativityReport:
    passed: bool
    worst_margin_flux: float  # min of c - (f u - mu F)
    worst_margin_potential: float  # min of c - F
    witness_flux: tuple
    witness_potential: tuple
    n_samples: int

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)


def dissipativity_audit(nl: Nonlinearity, u_samples, raise_on_failure: bool = True) -> DissipativityReport:
    """Check ``f u - mu_bar F <= c`` and ``F <= c`` at every node and sampled u."""
    us = np.asarray(u_samples, dtype=float).ravel()
    U = np.broadcast_to(us, (nl.grid.size, us.size))
    F = nl.F(U)
    flux = nl.f(U) * U - nl.mu_bar * F
    c = nl.c[:, None]
    m1 = c - flux
    m2 = c - F
    i1 = np.unravel_index(np.argmin(m1), m1.shape)
    i2 = np.unravel_index(np.argmin(m2), m2.shape)
    coords = nl.grid.coordinates
    w1 = (tuple(coords[i1[0]].tolist()), float(us[i1[1]]))
    w2 = (tuple(coords[i2[0]].tolist()), float(us[i2[1]]))
    report = DissipativityReport(
        passed=bool(m1[i1] >= 0 and m2[i2] >= 0),
        worst_margin_flux=float(m1[i1]),
        worst_margin_potential=float(m2[i2]),
        witness_flux=w1,
        witness_potential=w2,
        n_samples=int(m1.size),
    )
    if raise_on_failure and not report.passed:
        if m1[i1] < 0:
            msg = f"f u - mu_bar F <= c violated at x={w1[0]}, u={w1[1]} (margin {m1[i1]:.3e})"
            raise AuditFailure(msg, witness=w1, report=report)
        msg = f"F <= c violated at x={w2[0]}, u={w2[1]} (margin {m2[i2]:.3e})"
        raise AuditFailure(msg, witness=w2, report=report)
    return report


@dataclass
class GrowthAuditConfig:
    """Estimated embedding constants ``|u|_s <= C_s |u|_H1`` and audit settings."""

    C2: float
    C3: float
    C4: float
    C6: float
    safety: float = 1.05
    n_random: int = 0
    seed: int = 0
    rtol: float = 1e-12

    def constant(self, s: int) -> float:
        return self.safety * {2: self.C2, 3: self.C3, 4: self.C4, 6: self.C6}[s]


def _ratio_and_grad(x, op: DiscreteOperator, s: float):
    vol = op.vol
    ax = op.apply(x)
    h1sq = vol * (x @ ax)
    ps = vol * np.sum(np.abs(x) ** s)
    val = np.log(ps) / s - 0.5 * np.log(h1sq)
    grad = vol * np.abs(x) ** (s - 2) * x / ps - vol * ax / h1sq
    return -val, -grad


def estimate_embedding_constants(op: DiscreteOperator, n_random: int = 256, seed: int = 0, refine: int = 4) -> GrowthAuditConfig:
    """Estimate ``sup |u|_s / |u|_H1`` for s = 2, 3, 4, 6.

    ``C2`` is exact (``lambda_1^{-1/2}``). For the others the ratio is
    maximised over a seeded ensemble (smoothed noise, low-mode sums and
    Green's-function columns) and the best candidates are polished by
    L-BFGS, which only increases the estimate.
    """
    rng = np.random.default_rng(seed)
    grid = op.grid
    N = grid.size
    cands = [op.solve(rng.standard_normal((N, n_random)))]
    cols = np.linspace(0, N - 1, min(N, 32)).astype(int)
    e = np.zeros((N, cols.size))
    e[cols, np.arange(cols.size)] = 1.0
    cands.append(op.solve(e))
    cands.append(op.solve(op.solve(rng.standard_normal((N, n_random // 4 + 1)))))
    cands.append(np.ones((N, 1)))
    X = np.concatenate(cands, axis=1)
    h1 = norm_h1(X, op)
    out = {2: float(1.0 / np.sqrt(op.lambda1))}
    for s in (3, 4, 6):
        ratios = lp_norm(X, grid, s) / h1
        best = float(ratios.max())
        for idx in np.argsort(ratios)[::-1][:refine]:
            res = scipy.optimize.minimize(
                _ratio_and_grad, X[:, idx] / np.linalg.norm(X[:, idx]), args=(op, s), jac=True, method="L-BFGS-B",
                options={"maxiter": 500},
            )
            best = max(best, float(np.exp(-res.fun)))
        out[s] = best
    return GrowthAuditConfig(C2=out[2], C3=out[3], C4=out[4], C6=out[6], n_random=n_random, seed=seed)


def random_trial_fields(op: DiscreteOperator, count: int, seed: int, amp_range=(1e-2, 10.0)) -> np.ndarray:
    """Seeded fields of mixed smoothness with log-uniform sup-norm amplitudes, shape ``(N, count)``."""
    rng = np.random.default_rng(seed)
    N = op.size
    kind = rng.integers(0, 3, size=count)
    raw = rng.standard_normal((N, count))
    smooth = op.solve(raw)
    smoother = op.solve(smooth)
    X = np.where(kind == 0, raw, np.where(kind == 1, smooth, smoother))
    X = X / np.max(np.abs(X), axis=0)
    amps = np.exp(rng.uniform(np.log(amp_range[0]), np.log(amp_range[1]), size=count))
    return X * amps


GROWTH_INEQUALITIES = (
    "f_bound_L2",
    "f_lipschitz_L2",
    "F_bound_L1",
    "F_lipschitz_L1",
    "F_taylor_L1",
    "f_lipschitz_Hminus1",
)


@dataclass
class GrowthAuditReport:
    passed: bool
    n_pairs: int
    constant: float
    constant_hminus1: float
    worst_margin: dict  # per inequality, min over pairs of (rhs - lhs) / max(rhs, tiny)
    violations: dict
    witness: dict  # pair index of the worst margin

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)


def growth_terms(nl: Nonlinearity, op: DiscreteOperator, cfg: GrowthAuditConfig, u, h) -> dict:
    """Left and right sides of the six Nemitski inequalities, per trial pair."""
    grid = op.grid
    u = np.atleast_2d(np.asarray(u, float).T).T
    h = np.atleast_2d(np.asarray(h, float).T).T
    C = nl.nemitski_constant
    Cr = C * max(cfg.constant(2), cfg.constant(6))
    zero = np.zeros_like(u)
    f0 = lp_norm(nl.f(zero), grid, 2)
    fu, fuh = nl.f(u), nl.f(u + h)
    Fu, Fuh = nl.F(u), nl.F(u + h)
    u2, h2 = lp_norm(u, grid, 2), lp_norm(h, grid, 2)
    u4 = lp_norm(u, grid, 4)
    u6, h6 = lp_norm(u, grid, 6), lp_norm(h, grid, 6)
    terms = {
        "f_bound_L2": (lp_norm(fu, grid, 2), f0 + C * (u2 + u6**3)),
        "f_lipschitz_L2": (lp_norm(fuh - fu, grid, 2), C * h2 + C * (u6**2 + h6**2) * h6),
        "F_bound_L1": (lp_norm(Fu, grid, 1), C * (u2**2 / 2 + u4**4 / 4) + u2 * f0),
        "F_lipschitz_L1": (lp_norm(Fuh - Fu, grid, 1), (f0 + C * (u2 + h2) + 4 * C * (u6**3 + h6**3)) * h2),
        "F_taylor_L1": (lp_norm(Fuh - Fu - fu * h, grid, 1), (C * h2 + C * (u6**2 + h6**2) * h6) * h2),
        "f_lipschitz_Hminus1": (norm_hminus1(fuh - fu, op), Cr * h2 + Cr * (u6**2 + h6**2) * h2),
    }
    return terms


def growth_audit(nl: Nonlinearity, op: DiscreteOperator, cfg: GrowthAuditConfig, u, h, raise_on_failure: bool = True) -> GrowthAuditReport:
    """Check the six Nemitski inequalities for every column pair of ``u``, ``h``.

    Round-off slack is ``cfg.rtol`` relative to the right-hand side.
    """
    terms = growth_terms(nl, op, cfg, u, h)
    worst, viol, wit = {}, {}, {}
    for name in GROWTH_INEQUALITIES:
        lhs, rhs = (np.atleast_1d(t) for t in terms[name])
        scale = np.maximum(np.maximum(np.abs(rhs), np.abs(lhs)), 1e-300)
        margin = (rhs - lhs) / scale
        bad = lhs > rhs + cfg.rtol * scale
        k = int(np.argmin(margin))
        worst[name] = float(margin[k])
        viol[name] = int(np.count_nonzero(bad))
        wit[name] = k
    C = nl.nemitski_constant
    report = GrowthAuditReport(
        passed=all(v == 0 for v in viol.values()),
        n_pairs=int(np.atleast_1d(terms["f_bound_L2"][0]).size),
        constant=C,
        constant_hminus1=C * max(cfg.constant(2), cfg.constant(6)),
        worst_margin=worst,
        violations=viol,
        witness=wit,
    )
    if raise_on_failure and not report.passed:
        name = next(n for n in GROWTH_INEQUALITIES if viol[n])
        raise AuditFailure(f"growth inequality {name} violated for trial pair {wit[name]}", witness=wit[name], report=report)
    return report


def forcing_bound(nl: Nonlinearity, op: DiscreteOperator, cfg: GrowthAuditConfig, u, v) -> dict:
    """H^-1 norm of the linearised forcing against its two upper bounds.

    ``|g|_{H-1} <= C (C2 + C6 |u|_{L6}^2) |v|_{L2} <= C (C2 + C6^3 |u|_{H1}^2) |v|_{L2}``.
    """
    grid = op.grid
    g = linearized_forcing(nl, u, v)
    C = nl.C
    C2, C6 = cfg.constant(2), cfg.constant(6)
    v2 = lp_norm(v, grid, 2)
    return {
        "lhs": norm_hminus1(g, op),
        "bound_L6": C * (C2 + C6 * lp_norm(u, grid, 6) ** 2) * v2,
        "bound_H1": C * (C2 + C6**3 * inner_h1(u, u, op)) * v2,
    }
