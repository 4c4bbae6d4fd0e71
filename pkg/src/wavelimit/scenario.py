"""Build grids, operators, nonlinearities and initial data from a parsed config."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .attractor import EnsembleSpec, SweepConfig
from .config import Config
from .dynamics import HyperbolicState, ParabolicState, slow_velocity
from .errors import ConfigurationError
from .grid import Grid, build_grid, make_coefficients
from .nonlinearity import Nonlinearity, cubic, zero
from .operator import DiscreteOperator, build_operator


@dataclass
class Scenario:
    grid: Grid
    op: DiscreteOperator
    nl: Nonlinearity


def build_scenario(cfg: Config) -> Scenario:
    gs = cfg["grid"]
    d = gs["dimension"]
    lower, upper, counts = gs["lower"], gs["upper"], gs["counts"]
    if not (len(lower) == len(upper) == len(counts) == d):
        raise ConfigurationError(
            f"[grid] lower/upper/counts need {d} entries each, got {len(lower)}, {len(upper)}, {len(counts)}"
        )
    grid = build_grid(d, list(zip(lower, upper)) if d > 1 else (lower[0], upper[0]), counts)
    cs = cfg["coefficients"]
    op = build_operator(grid, make_coefficients(grid, a=cs["a"], beta=cs["beta"]))
    ns = cfg["nonlinearity"]
    if ns["kind"] == "zero":
        nl = zero(grid)
    elif ns["kind"] == "cubic":
        lam = ns["lam"]
        if ns["lam_width"] > 0:
            amp, w = ns["lam"], ns["lam_width"]
            lam = lambda *x: amp * np.exp(-sum(xi**2 for xi in x) / w**2)
        nl = cubic(grid, lam=lam, gamma=ns["gamma"], g=ns["g"], mu_bar=ns["mu_bar"], c=ns["c"])
    else:
        raise ConfigurationError(f"[nonlinearity] kind must be 'cubic' or 'zero', got {ns['kind']!r}")
    return Scenario(grid, op, nl)


def initial_field(grid: Grid, kind: str, amplitude: float, mode: int = 1, support: float = 3.0) -> np.ndarray:
    """``sine``: product of ``sin(mode pi (x - lo) / len)``; ``bump``: ``cos^2`` bump of radius ``support``."""
    if kind == "zero":
        return np.zeros(grid.size)
    if kind == "sine":
        u = np.ones(grid.size)
        for ax in range(grid.dimension):
            x = grid.coordinates[:, ax]
            lo, hi = grid.lower[ax], grid.upper[ax]
            u = u * np.sin(mode * np.pi * (x - lo) / (hi - lo))
        return amplitude * u
    if kind == "bump":
        r = grid.radius
        return amplitude * np.where(r < support, np.cos(0.5 * np.pi * r / support) ** 2, 0.0)
    raise ConfigurationError(f"[flow] initial must be 'sine', 'bump' or 'zero', got {kind!r}")


def initial_state(sc: Scenario, cfg: Config, eps=None):
    fs = cfg["flow"]
    eps = fs["eps"] if eps is None else eps
    u0 = initial_field(sc.grid, fs["initial"], fs["amplitude"], fs["mode"], fs["support"])
    if eps == 0:
        return ParabolicState(u0)
    if fs["velocity"] == "zero":
        v0 = np.zeros_like(u0)
    elif fs["velocity"] == "manifold":
        v0 = slow_velocity(sc.op, sc.nl, u0, eps)
    else:
        raise ConfigurationError(f"[flow] velocity must be 'zero' or 'manifold', got {fs['velocity']!r}")
    return HyperbolicState(u0, v0, eps)


def sweep_config(cfg: Config, seed: int, threads: int, eps_ladder=None) -> SweepConfig:
    at = cfg["attractor"]
    sw = cfg["sweep"]
    return SweepConfig(
        eps_ladder=tuple(eps_ladder if eps_ladder is not None else sw["eps"]),
        ensemble=EnsembleSpec(at["modes"], at["radius"], at["members"]),
        T0=at["T0"],
        T_sample=at["T_sample"],
        dt=cfg["flow"]["dt"],
        stride=at["stride"],
        alpha=sw["alpha"],
        seed=seed,
        threads=threads,
    )
