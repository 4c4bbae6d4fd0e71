"""
Uniform tensor-product grids on truncated boxes with homogeneous Dirichlet
boundary, and the coefficient fields sampled on them.

Only interior nodes carry unknowns. Boundary nodes are implicit zeros; the
coefficient samples, however, live on the full node set (interior plus
boundary) so that half-point averages next to the wall are defined.

Fields are flat arrays of length ``grid.size`` in lexicographic (C) order,
optionally with trailing batch dimensions.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence, Union

import numpy as np

from .errors import ConfigurationError

Extent = Union[float, Sequence[float]]


@dataclass(frozen=True)
class Grid:
    """Box ``prod_i [lower_i, upper_i]`` with ``counts[i]`` interior nodes per axis.

    Spacing is ``h_i = (upper_i - lower_i) / (n_i + 1)``; for a symmetric box
    ``[-L_i, L_i]`` that is ``2 L_i / (n_i + 1)``.
    """

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    counts: tuple[int, ...]

    @property
    def dimension(self) -> int:
        return len(self.counts)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.counts

    @property
    def full_shape(self) -> tuple[int, ...]:
        return tuple(n + 2 for n in self.counts)

    @property
    def size(self) -> int:
        return int(np.prod(self.counts))

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple((b - a) / (n + 1) for a, b, n in zip(self.lower, self.upper, self.counts))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def axis_nodes(self, axis: int, full: bool = False) -> np.ndarray:
        """Coordinates along one axis; ``full`` includes the two wall nodes."""
        n = self.counts[axis]
        h = self.spacing[axis]
        k = np.arange(n + 2) if full else np.arange(1, n + 1)
        return self.lower[axis] + k * h

    def mesh(self, full: bool = False) -> list[np.ndarray]:
        axes = [self.axis_nodes(i, full) for i in range(self.dimension)]
        return np.meshgrid(*axes, indexing="ij")

    @cached_property
    def coordinates(self) -> np.ndarray:
        """Interior node coordinates, shape ``(N, d)``, lexicographic order."""
        return np.stack([m.ravel() for m in self.mesh()], axis=1)

    @cached_property
    def radius(self) -> np.ndarray:
        """Euclidean distance of every interior node from the origin."""
        return np.sqrt(np.sum(self.coordinates**2, axis=1))

    def index(self, multi_index) -> int:
        """Flat index of an interior node given 0-based per-axis interior indices."""
        return int(np.ravel_multi_index(tuple(multi_index), self.counts))

    def multi_index(self, flat: int) -> tuple[int, ...]:
        return tuple(int(i) for i in np.unravel_index(flat, self.counts))

    def sample(self, func: Callable[..., np.ndarray]) -> np.ndarray:
        """Evaluate ``func(x_1, ..., x_d)`` on interior nodes, flattened."""
        vals = np.broadcast_to(func(*self.mesh()), self.counts)
        return np.array(vals, dtype=float).ravel()

    def inscribed_radius(self) -> float:
        """Largest r such that the ball of radius r about 0 lies in the box."""
        return float(min(min(-a, b) for a, b in zip(self.lower, self.upper)))

    @cached_property
    def hash(self) -> str:
        text = repr((self.lower, self.upper, self.counts))
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def build_grid(dimension: int, extents: Extent | Sequence[Extent], counts) -> Grid:
    """Construct a :class:`Grid`.

    ``extents`` per axis is either a half-width ``L`` (box ``[-L, L]``) or an
    explicit ``(lower, upper)`` pair. Scalars broadcast to every axis. In 1D a
    bare pair of numbers is read as ``(lower, upper)``.
    """
    if dimension not in (1, 2, 3):
        raise ConfigurationError(f"dimension must be 1, 2 or 3, got {dimension!r}")
    counts = np.atleast_1d(np.asarray(counts))
    if counts.size == 1:
        counts = np.repeat(counts, dimension)
    if counts.size != dimension:
        raise ConfigurationError(f"expected {dimension} node counts, got {counts.size}")
    if np.any(counts < 1) or not np.all(counts == np.floor(counts)):
        raise ConfigurationError(f"node counts must be positive integers, got {counts.tolist()}")

    if np.isscalar(extents):
        extents = [extents] * dimension
    elif dimension == 1 and len(extents) == 2 and all(np.isscalar(e) for e in extents):
        extents = [tuple(extents)]
    if len(extents) != dimension:
        raise ConfigurationError(f"expected {dimension} extents, got {len(extents)}")

    lower, upper = [], []
    for ext in extents:
        if np.isscalar(ext):
            if not ext > 0:
                raise ConfigurationError(f"box half-width must be positive, got {ext!r}")
            lo, hi = -float(ext), float(ext)
        else:
            lo, hi = (float(e) for e in ext)
            if not hi > lo:
                raise ConfigurationError(f"axis interval ({lo}, {hi}) has non-positive length")
        lower.append(lo)
        upper.append(hi)
    return Grid(tuple(lower), tuple(upper), tuple(int(n) for n in counts))


@dataclass(frozen=True)
class CoefficientField:
    """Nodal samples of the diffusion tensor and the potential.

    ``a`` has shape ``(d, d, *grid.full_shape)`` (walls included), ``beta``
    has shape ``(N,)`` on interior nodes.
    """

    grid: Grid
    a: np.ndarray
    beta: np.ndarray
    a0: float
    a1: float

    def check_ellipticity(self, rng_seed: int = 0, n_random: int = 16, rtol: float = 1e-12):
        """Raise :class:`ConfigurationError` unless ``a0|xi|^2 <= xi.A.xi <= a1|xi|^2``."""
        d = self.grid.dimension
        mats = np.moveaxis(self.a.reshape(d, d, -1), -1, 0)
        asym = np.max(np.abs(mats - np.swapaxes(mats, 1, 2))) if d > 1 else 0.0
        if asym > rtol * max(1.0, np.max(np.abs(mats))):
            raise ConfigurationError(f"diffusion tensor is not symmetric (max asymmetry {asym:.3e})")
        eig = np.linalg.eigvalsh(mats)
        lo, hi = eig[:, 0].min(), eig[:, -1].max()
        # random directions as well as the spectral extremes
        xi = np.random.default_rng(rng_seed).standard_normal((n_random, d))
        q = np.einsum("ki,nij,kj->nk", xi, mats, xi) / np.sum(xi**2, axis=1)
        lo = min(lo, q.min())
        hi = max(hi, q.max())
        tol = rtol * max(1.0, abs(self.a1))
        if lo < self.a0 - tol:
            bad = int(np.argmin(eig[:, 0]))
            idx = np.unravel_index(bad, self.grid.full_shape)
            raise ConfigurationError(
                f"ellipticity violated: min xi.A.xi/|xi|^2 = {lo:.6g} < a0 = {self.a0:.6g} at full-grid node {idx}"
            )
        if hi > self.a1 + tol:
            raise ConfigurationError(
                f"ellipticity violated: max xi.A.xi/|xi|^2 = {hi:.6g} > a1 = {self.a1:.6g}"
            )


def _sample_full(grid: Grid, value) -> np.ndarray:
    if callable(value):
        return np.array(np.broadcast_to(value(*grid.mesh(full=True)), grid.full_shape), dtype=float)
    return np.full(grid.full_shape, float(value))


def make_coefficients(grid: Grid, a=1.0, beta=0.0, a0=None, a1=None) -> CoefficientField:
    """Sample coefficients on ``grid``.

    ``a`` may be a scalar (isotropic constant), a callable of the coordinates
    returning a scalar field (isotropic), a ``d x d`` nested sequence of
    scalars/callables, or an array already shaped ``(d, d, *full_shape)``.
    ``beta`` is a scalar or callable. Bounds default to the sampled extremes.
    """
    d = grid.dimension
    if isinstance(a, np.ndarray) and a.shape == (d, d) + grid.full_shape:
        a_full = np.array(a, dtype=float)
    elif np.isscalar(a) or callable(a):
        iso = _sample_full(grid, a)
        a_full = np.zeros((d, d) + grid.full_shape)
        for i in range(d):
            a_full[i, i] = iso
    else:
        a_full = np.empty((d, d) + grid.full_shape)
        for i in range(d):
            for j in range(d):
                a_full[i, j] = _sample_full(grid, a[i][j])

    if callable(beta):
        beta_nodes = grid.sample(beta)
    elif np.ndim(beta) == 0:
        beta_nodes = np.full(grid.size, float(beta))
    else:
        beta_nodes = np.asarray(beta, dtype=float).ravel()
        if beta_nodes.size != grid.size:
            raise ConfigurationError(f"beta has {beta_nodes.size} samples, grid has {grid.size} nodes")

    mats = np.moveaxis(a_full.reshape(d, d, -1), -1, 0)
    eig = np.linalg.eigvalsh(0.5 * (mats + np.swapaxes(mats, 1, 2)))
    a0 = float(eig[:, 0].min()) if a0 is None else float(a0)
    a1 = float(eig[:, -1].max()) if a1 is None else float(a1)
    if not (a0 > 0 and a1 > 0):
        raise ConfigurationError(f"ellipticity bounds must be positive, got a0={a0}, a1={a1}")
    coeffs = CoefficientField(grid, a_full, beta_nodes, a0, a1)
    coeffs.check_ellipticity()
    return coeffs
