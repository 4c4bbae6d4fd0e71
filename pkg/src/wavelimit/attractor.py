"""
Ensemble approximations of attractors and set distances in ``H1 x H_{-alpha}``.

An attractor is approximated by pooling post-transient snapshots of a seeded
ensemble. Parabolic snapshots are lifted into the hyperbolic phase space by
pairing ``u`` with its own time derivative, so both flows can be compared
with the same product norm.

Distances go through a feature map ``Phi`` with
``|Phi(z1) - Phi(z2)|_2 = |z1 - z2|_{H1 x H_{-alpha}}``; in the eigenbasis
of ``A_h``::

    Phi(u, v) = sqrt(vol) [Lambda^{1/2} Q^T u ; Lambda^{-alpha/2} Q^T v]

and nearest neighbours are then exact Euclidean queries on a k-d tree.
"""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .dynamics import HyperbolicState, ParabolicState, gamma_lift, integrate
from .errors import ConfigurationError, DivergenceError
from .nonlinearity import Nonlinearity
from .operator import DiscreteOperator, inner_h1, inner_l2


@dataclass(frozen=True)
class EnsembleSpec:
    """``members`` initial states built from the lowest ``modes`` sine modes per axis, with ``|z(0)|_Z <= radius``."""

    modes: int = 4
    radius: float = 1.0
    members: int = 8

    def __post_init__(self):
        if self.members < 1:
            raise ConfigurationError(f"ensemble needs at least one member, got {self.members}")
        if self.radius < 0:
            raise ConfigurationError(f"ensemble radius must be nonnegative, got {self.radius}")
        if self.modes < 1:
            raise ConfigurationError(f"mode count must be >= 1, got {self.modes}")


def _sine_modes(grid, modes: int) -> np.ndarray:
    """Products of ``sin(m pi (x - lo) / len)`` over axes, shape ``(N, modes**d)``."""
    per_axis = []
    for ax in range(grid.dimension):
        x = grid.axis_nodes(ax)
        lo, hi = grid.lower[ax], grid.upper[ax]
        m = np.arange(1, modes + 1)
        per_axis.append(np.sin(np.pi * np.outer(x - lo, m) / (hi - lo)))
    basis = per_axis[0]
    for B in per_axis[1:]:
        basis = np.einsum("ia,jb->ijab", basis, B).reshape(basis.shape[0] * B.shape[0], -1)
    return basis


def sample_ensemble(op: DiscreteOperator, spec: EnsembleSpec, seed: int, eps: float = 0.0):
    """Seeded random low-mode initial data, returned as one batched state.

    Each member gets a radius drawn uniformly from ``(0, R]`` and is rescaled
    so that ``|u|_H1^2 + eps |v|_L2^2`` equals its square exactly. With
    ``eps = 0`` a :class:`ParabolicState` is returned.
    """
    rng = np.random.default_rng(seed)
    basis = _sine_modes(op.grid, spec.modes)
    nb = basis.shape[1]
    decay = 1.0 / np.arange(1, nb + 1)
    U = basis @ (decay[:, None] * rng.standard_normal((nb, spec.members)))
    Vv = basis @ (decay[:, None] * rng.standard_normal((nb, spec.members)))
    radii = spec.radius * (1.0 - rng.random(spec.members))
    if eps > 0:
        z2 = inner_h1(U, U, op) + eps * inner_l2(Vv, Vv, op.grid)
    else:
        Vv = np.zeros_like(U)
        z2 = inner_h1(U, U, op)
    scale = np.where(z2 > 0, radii / np.sqrt(np.where(z2 > 0, z2, 1.0)), 0.0)
    U *= scale
    Vv *= scale
    if eps > 0:
        return HyperbolicState(U, Vv, eps)
    return ParabolicState(U)


@dataclass
class AttractorApproximation:
    """Pooled snapshot pairs ``(u_i, v_i)``, stored as columns of ``u`` and ``v``."""

    u: np.ndarray  # (N, P)
    v: np.ndarray  # (N, P)
    eps: float  # 0 for a lifted parabolic set
    grid_hash: str
    seed: Optional[int] = None
    ensemble: Optional[EnsembleSpec] = None
    T0: float = 0.0
    window: tuple = (0.0, 0.0)
    stride: int = 1
    dt: float = 0.0
    times: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        if self.u.ndim != 2 or self.u.shape != self.v.shape:
            raise ValueError(f"snapshot arrays must be matching (N, P), got {self.u.shape} and {self.v.shape}")
        if self.u.shape[1] == 0:
            raise ConfigurationError("attractor approximation must be nonempty")

    def __len__(self) -> int:
        return self.u.shape[1]

    def union(self, other: "AttractorApproximation") -> "AttractorApproximation":
        if other.grid_hash != self.grid_hash:
            raise ConfigurationError(f"grid mismatch: {self.grid_hash} vs {other.grid_hash}")
        return AttractorApproximation(
            np.hstack([self.u, other.u]), np.hstack([self.v, other.v]), self.eps, self.grid_hash
        )

    def subset(self, idx) -> "AttractorApproximation":
        return AttractorApproximation(self.u[:, idx], self.v[:, idx], self.eps, self.grid_hash)

    def provenance(self) -> dict:
        return {
            "eps": self.eps,
            "seed": self.seed,
            "ensemble": None if self.ensemble is None else vars(self.ensemble),
            "T0": self.T0,
            "window": list(self.window),
            "stride": self.stride,
            "dt": self.dt,
            "grid_hash": self.grid_hash,
            "snapshots": len(self),
        }


def from_pairs(u, v, op: DiscreteOperator, eps: float = 0.0) -> AttractorApproximation:
    u = np.asarray(u, float).reshape(op.size, -1)
    v = np.asarray(v, float).reshape(op.size, -1)
    return AttractorApproximation(u, v, eps, op.grid.hash)


def approximate_attractor(
    op: DiscreteOperator,
    nl: Nonlinearity,
    initial,
    T0: float,
    T_sample: float,
    dt: float,
    stride: int = 1,
    lift: bool = True,
    threads: int = 1,
    seed: Optional[int] = None,
    ensemble: Optional[EnsembleSpec] = None,
) -> AttractorApproximation:
    """Snapshots from ``[T0, T0 + T_sample]`` every ``stride`` steps, all members pooled.

    ``initial`` is a batched state. Parabolic snapshots are lifted when
    ``lift`` is true; otherwise their v-component is zero. Members are split
    over ``threads`` workers; a diverging member aborts the run and the
    error names its ensemble index.
    """
    if not (T0 > 0 and T_sample > 0):
        raise ConfigurationError(f"T0 and T_sample must be positive, got {T0}, {T_sample}")
    hyper = isinstance(initial, HyperbolicState)
    U0 = np.asarray(initial.u, float).reshape(op.size, -1)
    K = U0.shape[1]
    V0 = np.asarray(initial.v, float).reshape(op.size, -1) if hyper else None
    chunks = np.array_split(np.arange(K), max(1, min(threads, K)))

    def run(idx):
        if hyper:
            s = HyperbolicState(U0[:, idx], V0[:, idx], initial.eps)
        else:
            s = ParabolicState(U0[:, idx])
        try:
            head = integrate(op, nl, s, T0, dt, snapshot_every=max(1, int(round(T0 / dt))))
            tail = integrate(op, nl, head.final, T_sample, dt, snapshot_every=stride)
        except DivergenceError as err:
            member = int(idx[err.columns[0]]) if err.columns is not None and len(err.columns) else int(idx[0])
            raise DivergenceError(f"ensemble member {member} diverged: {err}", t=err.t, dt=err.dt) from err
        return tail

    if len(chunks) == 1:
        parts = [run(chunks[0])]
    else:
        with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
            parts = list(pool.map(run, chunks))
    times = parts[0].times
    # (S, N, k) -> (N, S*k), members contiguous per snapshot
    U = np.concatenate([p.u for p in parts], axis=-1)
    U = np.moveaxis(U, 0, 1).reshape(op.size, -1)
    if hyper:
        Vv = np.concatenate([p.v for p in parts], axis=-1)
        Vv = np.moveaxis(Vv, 0, 1).reshape(op.size, -1)
        eps = initial.eps
    else:
        Vv = gamma_lift(op, nl, U)[1] if lift else np.zeros_like(U)
        eps = 0.0
    return AttractorApproximation(
        U, Vv, eps, op.grid.hash, seed=seed, ensemble=ensemble, T0=T0,
        window=(float(times[0]), float(times[-1])), stride=stride, dt=dt, times=times,
    )


class FeatureMap:
    """Isometry from ``H1 x H_{-alpha}`` (discrete) into Euclidean space.

    Uses the dense eigendecomposition when ``N`` is within the operator's
    cap. Above it only ``alpha = 0`` and ``alpha = 1`` are admissible and
    distances are formed from Gram matrices with sparse products and solves.
    """

    def __init__(self, op: DiscreteOperator, alpha: float):
        if not 0.0 <= alpha <= 1.0:
            raise ConfigurationError(f"alpha must lie in [0, 1], got {alpha}")
        self.op = op
        self.alpha = float(alpha)
        self.dense = op.size <= op.dense_cap
        if not self.dense and alpha not in (0.0, 1.0):
            raise ConfigurationError(
                f"alpha={alpha} needs the dense fractional norm, refused for N={op.size} > cap {op.dense_cap}"
            )
        if self.dense:
            lam, Q = op.eigh
            self.Q = Q
            self.Qt = np.ascontiguousarray(Q.T)
            sv = np.sqrt(op.vol)
            self.wu = sv * np.sqrt(lam)
            self.wv = sv * lam ** (-self.alpha / 2.0)

    BLOCK = 64

    def _rotate(self, M: np.ndarray) -> np.ndarray:
        """``Q^T M`` in zero-padded blocks of fixed width.

        BLAS rounding can depend on the number of columns in a product, so a
        fixed shape keeps every column's features independent of its batch.
        """
        P = M.shape[1]
        out = np.empty((self.Q.shape[1], P))
        buf = np.zeros((M.shape[0], self.BLOCK))
        for s in range(0, P, self.BLOCK):
            w = min(self.BLOCK, P - s)
            buf[:, :w] = M[:, s:s + w]
            buf[:, w:] = 0.0
            out[:, s:s + w] = (self.Qt @ buf)[:, :w]
        return out

    def __call__(self, X: AttractorApproximation) -> np.ndarray:
        if self.alpha == 0.0:
            fv = np.sqrt(self.op.vol) * X.v
        else:
            fv = self.wv[:, None] * self._rotate(X.v)
        return np.vstack([self.wu[:, None] * self._rotate(X.u), fv]).T


def _check_pair(X, Y):
    if X.grid_hash != Y.grid_hash:
        raise ConfigurationError(f"grid mismatch: {X.grid_hash} vs {Y.grid_hash}")


def _nearest_sparse(X, Y, op: DiscreteOperator, alpha: float, chunk: int = 256) -> np.ndarray:
    """Nearest-neighbour distances through Gram matrices, for grids above the dense cap."""
    vol = op.vol

    def vdual(V):
        return op.solve(V) if alpha == 1.0 else V

    AYu, BYv = op.apply(Y.u), vdual(Y.v)
    ny = vol * (np.einsum("ij,ij->j", Y.u, AYu) + np.einsum("ij,ij->j", Y.v, BYv))
    out = np.empty(len(X))
    for s in range(0, len(X), chunk):
        Xu, Xv = X.u[:, s:s + chunk], X.v[:, s:s + chunk]
        AXu, BXv = op.apply(Xu), vdual(Xv)
        nx = vol * (np.einsum("ij,ij->j", Xu, AXu) + np.einsum("ij,ij->j", Xv, BXv))
        G = vol * (AXu.T @ Y.u + BXv.T @ Y.v)
        d2 = np.maximum(nx[:, None] + ny[None, :] - 2.0 * G, 0.0)
        # exact zeros for identical elements, which the expansion cannot guarantee
        for i in range(Xu.shape[1]):
            same = np.all(Y.u == Xu[:, i:i + 1], axis=0) & np.all(Y.v == Xv[:, i:i + 1], axis=0)
            d2[i, same] = 0.0
        out[s:s + chunk] = np.sqrt(d2.min(axis=1))
    return out


def nearest_distances(X: AttractorApproximation, Y: AttractorApproximation, op: DiscreteOperator, alpha: float = 1.0, fmap: Optional[FeatureMap] = None) -> np.ndarray:
    """``inf_{y in Y} |x - y|`` for every ``x`` in ``X``."""
    _check_pair(X, Y)
    if X.grid_hash != op.grid.hash:
        raise ConfigurationError(f"grid mismatch between sets ({X.grid_hash}) and operator ({op.grid.hash})")
    fmap = fmap or FeatureMap(op, alpha)
    if not fmap.dense:
        return _nearest_sparse(X, Y, op, fmap.alpha)
    fy, fx = fmap(Y), fmap(X)
    k = min(4, fy.shape[0])
    _, idx = cKDTree(fy).query(fx, k=k)
    idx = np.asarray(idx).reshape(fx.shape[0], k)
    # recompute candidate distances with one fixed formula, so a pair gives
    # the same bits whatever tree it was found in
    out = np.empty(fx.shape[0])
    for s in range(0, fx.shape[0], 1024):
        diff = fx[s:s + 1024, None, :] - fy[idx[s:s + 1024]]
        out[s:s + 1024] = np.sqrt(np.min(np.einsum("ikn,ikn->ik", diff, diff), axis=1))
    return out


def semidistance(X: AttractorApproximation, Y: AttractorApproximation, op: DiscreteOperator, alpha: float = 1.0, fmap: Optional[FeatureMap] = None) -> float:
    """``sup_{x in X} inf_{y in Y} |x - y|_{H1 x H_{-alpha}}``."""
    return float(np.max(nearest_distances(X, Y, op, alpha, fmap)))


def hausdorff(X, Y, op: DiscreteOperator, alpha: float = 1.0, fmap: Optional[FeatureMap] = None) -> float:
    """Symmetric Hausdorff distance, the larger of the two semidistances."""
    fmap = fmap or FeatureMap(op, alpha)
    return max(semidistance(X, Y, op, alpha, fmap), semidistance(Y, X, op, alpha, fmap))


def z_energy(X: AttractorApproximation, op: DiscreteOperator, eps: Optional[float] = None) -> np.ndarray:
    """``|u|_H1^2 + eps |v|_L2^2`` for every snapshot."""
    eps = X.eps if eps is None else eps
    return inner_h1(X.u, X.u, op) + eps * inner_l2(X.v, X.v, op.grid)


@dataclass
class SweepReport:
    eps: np.ndarray
    semidistance: np.ndarray
    sup_Z_bound: np.ndarray
    c_prime: float  # sup |u|_H1^2 over the lifted parabolic set
    alpha: float
    provenance: dict = field(default_factory=dict)

    @property
    def bound_ok(self) -> bool:
        return bool(np.all(self.sup_Z_bound <= 2.0 * self.c_prime))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["eps", "semidistance", "sup_Z_bound"])
        for row in zip(self.eps, self.semidistance, self.sup_Z_bound):
            w.writerow([repr(float(x)) for x in row])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "eps": self.eps.tolist(),
            "semidistance": self.semidistance.tolist(),
            "sup_Z_bound": self.sup_Z_bound.tolist(),
            "c_prime": self.c_prime,
            "bound_ok": self.bound_ok,
            "alpha": self.alpha,
            "sampling_bias": "finite snapshot sets overestimate each infimum, so distances are biased upward",
            "provenance": self.provenance,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


@dataclass(frozen=True)
class SweepConfig:
    eps_ladder: Sequence[float]
    ensemble: EnsembleSpec
    T0: float
    T_sample: float
    dt: float
    stride: int = 1
    alpha: float = 1.0
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if len(self.eps_ladder) == 0:
            raise ConfigurationError("eps ladder is empty")
        if any(not e > 0 for e in self.eps_ladder):
            raise ConfigurationError(f"every eps must be positive, got {list(self.eps_ladder)}")


def parabolic_attractor(op, nl, cfg: SweepConfig, seed: Optional[int] = None) -> AttractorApproximation:
    seed = cfg.seed if seed is None else seed
    init = sample_ensemble(op, cfg.ensemble, seed)
    return approximate_attractor(op, nl, init, cfg.T0, cfg.T_sample, cfg.dt, cfg.stride, True, cfg.threads, seed, cfg.ensemble)


def hyperbolic_attractor(op, nl, cfg: SweepConfig, eps: float, seed: Optional[int] = None) -> AttractorApproximation:
    seed = cfg.seed if seed is None else seed
    init = sample_ensemble(op, cfg.ensemble, seed, eps=eps)
    return approximate_attractor(op, nl, init, cfg.T0, cfg.T_sample, cfg.dt, cfg.stride, True, cfg.threads, seed, cfg.ensemble)


def eps_sweep(op: DiscreteOperator, nl: Nonlinearity, cfg: SweepConfig, reference: Optional[AttractorApproximation] = None) -> SweepReport:
    """Semidistance from each hyperbolic attractor approximation to the lifted parabolic one."""
    A0 = reference if reference is not None else parabolic_attractor(op, nl, cfg)
    fmap = FeatureMap(op, cfg.alpha)
    dists, sups = [], []
    for eps in cfg.eps_ladder:
        Ae = hyperbolic_attractor(op, nl, cfg, eps)
        dists.append(semidistance(Ae, A0, op, cfg.alpha, fmap))
        sups.append(float(np.max(z_energy(Ae, op))))
    c_prime = float(np.max(inner_h1(A0.u, A0.u, op)))
    prov = {"reference": A0.provenance(), "T0": cfg.T0, "T_sample": cfg.T_sample, "dt": cfg.dt, "stride": cfg.stride, "seed": cfg.seed}
    return SweepReport(np.asarray(cfg.eps_ladder, float), np.asarray(dists), np.asarray(sups), c_prime, cfg.alpha, prov)


def reproducibility_probe(op, nl, cfg: SweepConfig, seeds=(0, 1)) -> float:
    """Hausdorff distance between lifted parabolic attractors from two seeds."""
    A = parabolic_attractor(op, nl, cfg, seeds[0])
    B = parabolic_attractor(op, nl, cfg, seeds[1])
    return hausdorff(A, B, op, cfg.alpha)


def lift_consistency(A: AttractorApproximation, op: DiscreteOperator, members: int) -> float:
    """Largest relative L2 gap between lifted v and the central difference of u along each member's snapshots.

    Snapshots must be stride-spaced in time with ``members`` columns per
    snapshot, as produced by :func:`approximate_attractor`.
    """
    if A.times is None or len(A.times) < 3:
        raise ConfigurationError("need at least three snapshot times")
    h = A.dt * A.stride
    S = len(A.times)
    U = A.u.reshape(op.size, S, members)
    V = A.v.reshape(op.size, S, members)
    D = (U[:, 2:] - U[:, :-2]) / (2 * h)
    num = np.sqrt(inner_l2(D - V[:, 1:-1], D - V[:, 1:-1], op.grid))
    den = np.sqrt(inner_l2(V[:, 1:-1], V[:, 1:-1], op.grid))
    return float(np.max(num / np.maximum(den, 1e-300)))
