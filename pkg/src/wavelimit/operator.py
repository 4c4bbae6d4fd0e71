"""
The discrete elliptic operator ``u -> beta u - div(A grad u)`` and the norm
hierarchy it generates.

The operator is assembled from its quadratic form, so symmetry holds by
construction::

    <A_h u, u>_{L2} = sum_edges vol * a_ii(edge) (D_i u)^2
                      + 2 sum_{i<j} sum_cells vol * a_ij(cell) avg(D_i u) avg(D_j u)
                      + sum_nodes vol * beta u^2

Diagonal coefficients sit at edge midpoints (mean of the two end samples),
mixed coefficients at cell centres (mean of the four corner samples). In 1D
this is the usual three-point flux-form stencil.

Norms, with ``vol`` the cell volume::

    |u|_{L2}^2  = vol * u.u
    |u|_{H1}^2  = vol * (A_h u).u
    |w|_{H-1}^2 = vol * (A_h^{-1} w).w
    |w|_{H-a}   = |A_h^{-a/2} w|_{L2}           (dense spectral path)
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from functools import cached_property, reduce

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConfigurationError, SolverError
from .grid import CoefficientField, Grid

DENSE_CAP = 4096
SOLVE_RTOL = 1e-10
LAMBDA1_TOL = 1e-8
LAMBDA1_MAXITER = 100_000


def _kron_all(mats):
    return reduce(lambda x, y: sp.kron(x, y, format="csr"), mats)


def _restrict(n: int) -> sp.csr_matrix:
    """Interior rows of the full node set ``0..n+1``."""
    return sp.eye(n, n + 2, k=1, format="csr")


def _forward_diff(n: int, h: float) -> sp.csr_matrix:
    """Full nodes ``0..n+1`` to the ``n+1`` edges between them."""
    return sp.diags([-np.ones(n + 1), np.ones(n + 1)], [0, 1], shape=(n + 1, n + 2), format="csr") / h


def _midpoint(n_full: int) -> sp.csr_matrix:
    """Average of neighbouring entries, ``n_full -> n_full - 1``."""
    m = n_full - 1
    return sp.diags([0.5 * np.ones(m), 0.5 * np.ones(m)], [0, 1], shape=(m, n_full), format="csr")


def _assemble(grid: Grid, coeffs: CoefficientField) -> sp.csr_matrix:
    d = grid.dimension
    n = grid.counts
    h = grid.spacing
    full_eye = [sp.eye(k + 2, format="csr") for k in n]
    extend = _kron_all([_restrict(k).T for k in n])  # interior -> full (walls zero)

    # gradient components on all edges of every axis, walls included
    grads = []
    for i in range(d):
        grads.append(_kron_all([_forward_diff(n[k], h[k]) if k == i else full_eye[k] for k in range(d)]) @ extend)

    mat = sp.csr_matrix((grid.size, grid.size))
    for i in range(d):
        # edges in direction i with every other coordinate interior
        rows = _kron_all([sp.eye(n[k] + 1, format="csr") if k == i else _restrict(n[k]) for k in range(d)])
        coef = _kron_all([_midpoint(n[k] + 2) if k == i else _restrict(n[k]) for k in range(d)]) @ coeffs.a[i, i].ravel()
        g = rows @ grads[i]
        mat = mat + g.T @ sp.diags(coef) @ g

    for i in range(d):
        for j in range(i + 1, d):
            # cells in the (i, j) plane; i-edges averaged along j and vice versa
            to_cell_i = _kron_all(
                [sp.eye(n[k] + 1, format="csr") if k == i else _midpoint(n[k] + 2) if k == j else _restrict(n[k]) for k in range(d)]
            )
            to_cell_j = _kron_all(
                [sp.eye(n[k] + 1, format="csr") if k == j else _midpoint(n[k] + 2) if k == i else _restrict(n[k]) for k in range(d)]
            )
            coef = _kron_all(
                [_midpoint(n[k] + 2) if k in (i, j) else _restrict(n[k]) for k in range(d)]
            ) @ coeffs.a[i, j].ravel()
            gi = to_cell_i @ grads[i]
            gj = to_cell_j @ grads[j]
            cross = gi.T @ sp.diags(coef) @ gj
            mat = mat + cross + cross.T

    mat = mat + sp.diags(coeffs.beta)
    mat = sp.csr_matrix(mat)
    mat.sum_duplicates()
    mat.eliminate_zeros()
    return mat


@dataclass(frozen=True, eq=False)
class DiscreteOperator:
    """Sparse symmetric realisation ``A_h`` of ``beta - div(A grad)`` on a grid."""

    grid: Grid
    coeffs: CoefficientField
    matrix: sp.csr_matrix
    dense_cap: int = DENSE_CAP
    _cache: dict = field(default_factory=dict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @property
    def size(self) -> int:
        return self.grid.size

    @property
    def vol(self) -> float:
        return self.grid.cell_volume

    def apply(self, u: np.ndarray) -> np.ndarray:
        return self.matrix @ u

    def asymmetry(self) -> float:
        diff = abs(self.matrix - self.matrix.T)
        return float(diff.max()) if diff.nnz else 0.0

    def shifted_solver(self, alpha: float, beta: float):
        """Cached solver for ``(alpha I + beta A_h) x = b``.

        Direct sparse factorisation up to ``dense_cap`` unknowns, Jacobi
        preconditioned CG above it. Every solve is residual-checked.
        """
        key = (float(alpha), float(beta))
        with self._lock:
            solver = self._cache.get(key)
            if solver is None:
                solver = _ShiftedSolver(self.matrix, alpha, beta, direct=self.size <= self.dense_cap)
                self._cache[key] = solver
        return solver

    def solve(self, b: np.ndarray) -> np.ndarray:
        """``A_h^{-1} b``."""
        return self.shifted_solver(0.0, 1.0)(b)

    @cached_property
    def eigh(self) -> tuple[np.ndarray, np.ndarray]:
        """Dense eigendecomposition (ascending); refused above ``dense_cap``."""
        if self.size > self.dense_cap:
            raise ConfigurationError(
                f"dense eigendecomposition refused: N={self.size} exceeds cap {self.dense_cap}; "
                "use alpha in {0, 1}, which only need sparse solves"
            )
        return scipy.linalg.eigh(self.matrix.toarray())

    @cached_property
    def lambda1(self) -> float:
        return lambda1(self)


class _ShiftedSolver:
    def __init__(self, matrix, alpha, beta, direct):
        self.alpha = alpha
        self.beta = beta
        self.system = (alpha * sp.eye(matrix.shape[0], format="csc") + beta * matrix).tocsc()
        self.direct = direct
        if direct:
            self._lu = spla.splu(self.system)
        else:
            self._minv = sp.diags(1.0 / self.system.diagonal())

    def __call__(self, b: np.ndarray) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        if self.direct:
            x = self._lu.solve(b)
        elif b.ndim == 1:
            x = self._cg(b)
        else:
            x = np.column_stack([self._cg(col) for col in b.reshape(b.shape[0], -1).T]).reshape(b.shape)
        bnorm = np.linalg.norm(b)
        res = np.linalg.norm(self.system @ x - b)
        if res > SOLVE_RTOL * bnorm and res > 1e-300:
            x = x + self._refine(b - self.system @ x)
            res = np.linalg.norm(self.system @ x - b)
            if res > SOLVE_RTOL * bnorm:
                raise SolverError(f"linear solve residual {res:.3e} exceeds {SOLVE_RTOL:g} * |b| = {SOLVE_RTOL * bnorm:.3e}", res)
        return x

    def _refine(self, r):
        return self._lu.solve(r) if self.direct else self._cg(r)

    def _cg(self, b):
        x, info = spla.cg(self.system, b, rtol=SOLVE_RTOL * 0.1, atol=0.0, M=self._minv, maxiter=20 * b.size)
        if info != 0:
            res = np.linalg.norm(self.system @ x - b)
            raise SolverError(f"CG did not converge (info={info}, residual {res:.3e})", res)
        return x


def build_operator(grid: Grid, coeffs: CoefficientField, dense_cap: int = DENSE_CAP) -> DiscreteOperator:
    if coeffs.grid != grid:
        raise ConfigurationError("coefficient field was sampled on a different grid")
    coeffs.check_ellipticity()
    return DiscreteOperator(grid, coeffs, _assemble(grid, coeffs), dense_cap=dense_cap)


def _check_same(u, v):
    if np.shape(u) != np.shape(v):
        raise ValueError(f"field size mismatch: {np.shape(u)} vs {np.shape(v)}")


def inner_l2(u: np.ndarray, v: np.ndarray, grid: Grid):
    """Nodal quadrature ``vol * sum u v`` (per column for batched fields)."""
    _check_same(u, v)
    if np.shape(u)[0] != grid.size:
        raise ValueError(f"field has {np.shape(u)[0]} nodes, grid has {grid.size}")
    return grid.cell_volume * np.einsum("i...,i...->...", u, v)


def norm_l2(u: np.ndarray, grid: Grid):
    return np.sqrt(inner_l2(u, u, grid))


def inner_h1(u: np.ndarray, v: np.ndarray, op: DiscreteOperator):
    _check_same(u, v)
    return inner_l2(op.apply(u), v, op.grid)


def norm_h1(u: np.ndarray, op: DiscreteOperator):
    return np.sqrt(np.maximum(inner_h1(u, u, op), 0.0))


def inner_hminus1(w: np.ndarray, z: np.ndarray, op: DiscreteOperator):
    _check_same(w, z)
    return inner_l2(op.solve(w), z, op.grid)


def norm_hminus1(w: np.ndarray, op: DiscreteOperator):
    """``sqrt(<A_h^{-1} w, w>_{L2})``; the solve is residual-checked."""
    return np.sqrt(np.maximum(inner_hminus1(w, w, op), 0.0))


def _spectral_norm(w: np.ndarray, op: DiscreteOperator, alpha: float) -> float:
    lam, vec = op.eigh
    coef = vec.T @ w
    weights = lam ** (-alpha)
    return float(np.sqrt(op.vol * np.sum(weights * coef**2)))


def fractional_norm(w: np.ndarray, op: DiscreteOperator, alpha: float) -> float:
    """``|A_h^{-alpha/2} w|_{L2}`` for ``alpha`` in ``[0, 1]``.

    The endpoints go through the L2 and sparse H^-1 paths; interior exponents
    need the dense eigendecomposition and are refused on large grids.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ConfigurationError(f"alpha must lie in [0, 1], got {alpha}")
    if alpha == 0.0:
        return float(norm_l2(w, op.grid))
    if alpha == 1.0:
        return float(norm_hminus1(w, op))
    return _spectral_norm(w, op, alpha)


def lambda1(op: DiscreteOperator, tol: float = LAMBDA1_TOL, maxiter: int = LAMBDA1_MAXITER, seed: int = 0) -> float:
    """Smallest eigenvalue of ``A_h`` by inverse power iteration.

    Stops once the Rayleigh residual ``|A x - lambda x| <= tol |x|``.
    """
    rng = np.random.default_rng(seed)
    x = np.ones(op.size) + 0.1 * rng.standard_normal(op.size)
    x /= np.linalg.norm(x)
    lam = float(x @ op.apply(x))
    for _ in range(maxiter):
        y = op.solve(x)
        x = y / np.linalg.norm(y)
        ax = op.apply(x)
        lam = float(x @ ax)
        res = np.linalg.norm(ax - lam * x)
        if res <= tol:
            return lam
    raise SolverError(f"inverse power iteration did not converge in {maxiter} iterations (residual {res:.3e})", res)
