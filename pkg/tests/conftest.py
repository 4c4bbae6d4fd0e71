import numpy as np
import pytest

from wavelimit import build_grid, build_operator, cubic, make_coefficients, zero


@pytest.fixture(scope="session")
def line64():
    g = build_grid(1, (0.0, np.pi), 64)
    return build_operator(g, make_coefficients(g))


@pytest.fixture(scope="session")
def line32():
    g = build_grid(1, (0.0, np.pi), 32)
    return build_operator(g, make_coefficients(g))


@pytest.fixture(scope="session")
def square():
    g = build_grid(2, [(0.0, 1.0), (0.0, 2.0)], (7, 9))
    off = lambda x, y: 0.3 * np.cos(y)
    a = [[lambda x, y: 1.5 + 0.5 * np.sin(x), off], [off, lambda x, y: 1.2 + x * y / 4]]
    return build_operator(g, make_coefficients(g, a=a, beta=lambda x, y: 0.5 + x))


@pytest.fixture(scope="session")
def chafee64(line64):
    return line64, cubic(line64.grid, 2.0, 1.0)


def sine(grid, m=1):
    x = grid.coordinates[:, 0]
    lo, hi = grid.lower[0], grid.upper[0]
    return np.sin(m * np.pi * (x - lo) / (hi - lo))
