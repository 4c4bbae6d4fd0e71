"""
Independent dense and brute-force references.

Nothing here shares code paths with the production routines it is used to
check: the linear semigroup is propagated mode by mode through matrix
exponentials of the 2x2 blocks of the eigen-decoupled system, H^-1 norms go
through a dense Cholesky factor, the 1D operator is assembled by an explicit
loop, and set distances by nested loops.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .errors import ConfigurationError
from .grid import Grid
from .operator import DENSE_CAP, DiscreteOperator


def _dense_matrix(op: DiscreteOperator) -> np.ndarray:
    if op.size > DENSE_CAP:
        raise ConfigurationError(f"dense oracle refused: N={op.size} exceeds cap {DENSE_CAP}")
    return op.matrix.toarray()


def dense_linear_solution(op: DiscreteOperator, eps: float, z0, t: float):
    """Exact ``(u(t), v(t))`` of ``eps u'' + u' + A_h u = 0``.

    In the eigenbasis of ``A_h`` the 2N x 2N generator splits into N blocks
    ``[[0, 1], [-mu/eps, -1/eps]]``, each exponentiated exactly.
    """
    u0, v0 = (np.asarray(z, dtype=float) for z in z0)
    lam, Q = np.linalg.eigh(_dense_matrix(op))
    a, b = Q.T @ u0, Q.T @ v0
    blocks = np.zeros((lam.size, 2, 2))
    blocks[:, 0, 1] = 1.0
    blocks[:, 1, 0] = -lam / eps
    blocks[:, 1, 1] = -1.0 / eps
    E = scipy.linalg.expm(blocks * t)
    a_t = E[:, 0, 0] * a + E[:, 0, 1] * b
    b_t = E[:, 1, 0] * a + E[:, 1, 1] * b
    return Q @ a_t, Q @ b_t


def dense_parabolic_solution(op: DiscreteOperator, u0, t: float) -> np.ndarray:
    """Exact ``exp(-A_h t) u0``."""
    lam, Q = np.linalg.eigh(_dense_matrix(op))
    return Q @ (np.exp(-lam * t) * (Q.T @ np.asarray(u0, float)))


def dense_hminus1(w, op: DiscreteOperator) -> float:
    """``sqrt(vol * w^T A_h^{-1} w)`` through a dense Cholesky factor."""
    L = scipy.linalg.cholesky(_dense_matrix(op), lower=True)
    y = scipy.linalg.solve_triangular(L, np.asarray(w, float), lower=True)
    return float(np.sqrt(op.vol * y @ y))


def dense_eigenvalues(op: DiscreteOperator) -> np.ndarray:
    return np.linalg.eigvalsh(_dense_matrix(op))


def fd_gradient_check(nl, u, du: float) -> float:
    """Max nodewise ``|(F(u+du) - F(u-du)) / (2 du) - f(u)|``."""
    if not du > 0:
        raise ConfigurationError(f"du must be positive, got {du}")
    u = np.asarray(u, dtype=float)
    diff = (nl.F(u + du) - nl.F(u - du)) / (2.0 * du)
    return float(np.max(np.abs(diff - nl.f(u))))


def loop_assembly_1d(grid: Grid, a_func, beta_func=None) -> np.ndarray:
    """Dense 1D flux-form matrix built entry by entry.

    ``A[i,i] = (a_{i-1/2} + a_{i+1/2}) / h^2 + beta_i`` and
    ``A[i,i+-1] = -a_{i+-1/2} / h^2`` with ``a_{i+1/2} = (a(x_i) + a(x_{i+1})) / 2``.
    """
    if grid.dimension != 1:
        raise ConfigurationError("loop assembly is 1D only")
    n = grid.counts[0]
    h = grid.spacing[0]
    x = [grid.lower[0] + k * h for k in range(n + 2)]
    A = np.zeros((n, n))
    for i in range(n):
        k = i + 1  # full-grid index
        left = 0.5 * (a_func(x[k - 1]) + a_func(x[k]))
        right = 0.5 * (a_func(x[k]) + a_func(x[k + 1]))
        A[i, i] = (left + right) / h**2 + (beta_func(x[k]) if beta_func else 0.0)
        if i > 0:
            A[i, i - 1] = -left / h**2
        if i < n - 1:
            A[i, i + 1] = -right / h**2
    return A


def brute_semidistance(X, Y, dist) -> float:
    """``max_x min_y dist(x, y)`` by nested loops."""
    worst = 0.0
    for x in X:
        best = np.inf
        for y in Y:
            best = min(best, dist(x, y))
        worst = max(worst, best)
    return worst
