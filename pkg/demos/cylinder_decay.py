"""Crank-Nicolson run on a uniform cable against the separable cosine mode.

Halving h and dt together should cut the error by four each time.
"""
import math

import numpy as np

from conformal_cable import BoundaryCondition, CableParams, DendriteGeometry, Grid1D, solve
from conformal_cable.pde import convergence_orders
from conformal_cable.solutions import cylindrical_mode

params = CableParams(c_M=1.0, r_M=1.0, r_L=1.0)
geom = DendriteGeometry(d0=1.0, a=0.0, nu=0.0, x_min=0.0, x_max=2 * math.pi)
exact = cylindrical_mode(params, geom, k=1.0)

errors = []
for n in (101, 201, 401, 801):
    grid = Grid1D.on(geom, n)
    dt = 0.1 * grid.h
    f = solve(geom, params, grid, BoundaryCondition.sealed(), np.cos(grid.x), dt, params.tau)
    ref = exact(grid.x, f.times[-1])
    errors.append(np.linalg.norm(f.values[-1] - ref) / np.linalg.norm(ref))
    print(f"n={n:4d}  h={grid.h:.4f}  relative L2 error at t=tau: {errors[-1]:.3e}")
print("observed orders:", np.round(convergence_orders(errors), 3))
