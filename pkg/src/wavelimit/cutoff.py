"""Radial cutoff fields used to localise energies outside a ball.

The ramp is the quintic smootherstep on ``[1, 2]``::

    theta_bar(s) = 0                           s <= 1
                 = 10 r^3 - 15 r^4 + 6 r^5     r = s - 1, 1 < s < 2
                 = 1                           s >= 2

It is C^2 and nondecreasing. ``theta = theta_bar**2`` and the radius-k
versions are ``theta_bar(|x|^2 / k^2)``, so ``theta_k`` vanishes on
``|x| <= k`` and equals one on ``|x| >= sqrt(2) k``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .grid import Grid


def ramp(s):
    s = np.asarray(s, dtype=float)
    r = np.clip(s - 1.0, 0.0, 1.0)
    val = r**3 * (10.0 + r * (-15.0 + 6.0 * r))
    return np.where(s <= 1.0, 0.0, np.where(s >= 2.0, 1.0, val))


@dataclass(frozen=True)
class CutoffField:
    k: float
    theta_bar: np.ndarray
    theta: np.ndarray


def cutoff_field(grid: Grid, k: float) -> CutoffField:
    if not k >= 1:
        raise ConfigurationError(f"cutoff radius k must be >= 1, got {k}")
    s = grid.radius**2 / float(k) ** 2
    tb = ramp(s)
    return CutoffField(k, tb, tb * tb)
