"""
Linear damped wave against its exact semigroup.

With f = 0 the semi-discrete system decouples in the eigenbasis of A_h, so the
dense oracle gives the exact u(T). The IMEX integrator is first order, and
halving dt should roughly halve the error.

    python demos/linear_oracle.py
"""

import numpy as np

from wavelimit import HyperbolicState, build_grid, build_operator, integrate, make_coefficients, zero
from wavelimit.operator import norm_l2
from wavelimit.oracle import dense_linear_solution

grid = build_grid(1, (0.0, np.pi), 64)
op = build_operator(grid, make_coefficients(grid))
x = grid.coordinates[:, 0]
s0 = HyperbolicState(np.sin(x) + 0.2 * np.sin(3 * x), np.zeros_like(x), eps=0.1)

T = 1.0
u_ref, _ = dense_linear_solution(op, s0.eps, (s0.u, s0.v), T)
print(f"lambda_1 = {op.lambda1:.10f}")
prev = None
for dt in (4e-4, 2e-4, 1e-4):
    u = integrate(op, zero(grid), s0, T, dt, snapshot_every=10**9).u[-1]
    err = norm_l2(u - u_ref, grid) / norm_l2(u_ref, grid)
    ratio = "" if prev is None else f"   ratio {prev / err:.3f}"
    print(f"dt={dt:.0e}  relative L2 error {err:.3e}{ratio}")
    prev = err
