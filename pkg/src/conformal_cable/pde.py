"""Finite-difference cable solver and the residual oracle.

The spatial operator is the conservative (flux) discretisation of

    (1 / (4 r_L c_M d)) d/dx (d^2 dV/dx) - V / (r_M c_M)

and time stepping is Crank-Nicolson.  The residual oracle deliberately uses a
different stencil (product rule with the analytic slope of d) so that it stays
independent of the solver.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, TextIO, Union

import numpy as np
import scipy.sparse as sp
from scipy.linalg import get_lapack_funcs

from .geometry import CableParams, DendriteGeometry, DomainError, diameter, diameter_slope

__all__ = [
    "SolverError",
    "NonFiniteFieldError",
    "Grid1D",
    "Field",
    "EndKind",
    "BoundaryCondition",
    "assemble_spatial_operator",
    "solve",
    "ResidualReport",
    "residual",
    "sample",
    "RefinementStudy",
    "residual_refinement",
    "convergence_orders",
    "write_field_csv",
    "read_field_csv",
]


class NonFiniteFieldError(ValueError):
    """A sampled or computed field holds inf or nan."""


class SolverError(RuntimeError):
    def __init__(self, message: str, step: int):
        super().__init__(f"{message} (step {step})")
        self.step = step


@dataclass(frozen=True)
class Grid1D:
    n: int
    x_min: float
    x_max: float

    def __post_init__(self):
        if self.n < 5:
            raise ValueError("grid needs at least 5 nodes")
        if not self.x_min < self.x_max:
            raise ValueError("x_min must be smaller than x_max")

    @classmethod
    def on(cls, geom: DendriteGeometry, n: int) -> "Grid1D":
        return cls(n, geom.x_min, geom.x_max)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.n)

    @property
    def h(self) -> float:
        return (self.x_max - self.x_min) / (self.n - 1)


@dataclass(frozen=True)
class Field:
    """Samples ``values[k, i] = V(x_i, t_k)``."""

    grid: Grid1D
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values)
        if times.ndim != 1 or np.any(np.diff(times) <= 0):
            raise ValueError("times must be strictly increasing")
        if values.shape != (times.size, self.grid.n):
            raise ValueError(f"values shape {values.shape} != {(times.size, self.grid.n)}")
        if not np.all(np.isfinite(values)):
            raise NonFiniteFieldError("field contains non-finite values")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.values)


class EndKind(enum.Enum):
    SEALED = "sealed"  # zero axial current, dV/dx = 0
    CLAMPED = "clamped"  # prescribed value, 0 unless a function is given


@dataclass(frozen=True)
class BoundaryCondition:
    left: EndKind = EndKind.SEALED
    right: EndKind = EndKind.SEALED
    # optional Dirichlet data g(t) for clamped ends
    left_value: Optional[Callable[[float], float]] = field(default=None, compare=False)
    right_value: Optional[Callable[[float], float]] = field(default=None, compare=False)

    @classmethod
    def sealed(cls) -> "BoundaryCondition":
        return cls(EndKind.SEALED, EndKind.SEALED)

    @classmethod
    def clamped(cls, left_value=None, right_value=None) -> "BoundaryCondition":
        return cls(EndKind.CLAMPED, EndKind.CLAMPED, left_value, right_value)


def _check_grid(geom: DendriteGeometry, grid: Grid1D):
    if grid.x_min < geom.x_min - 1e-12 or grid.x_max > geom.x_max + 1e-12:
        raise DomainError("grid extends outside the geometry's domain")


def _tridiagonal(geom, params, grid, bc):
    x, h = grid.x, grid.h
    n = grid.n
    d = diameter(geom, x)
    mid2 = diameter(geom, x[:-1] + h / 2) ** 2  # d^2 at the n - 1 cell faces
    coef = 1.0 / (4.0 * params.r_L * params.c_M * d * h * h)
    leak = 1.0 / params.tau

    lower = np.zeros(n - 1)  # L[i, i-1]
    upper = np.zeros(n - 1)  # L[i, i+1]
    main = np.zeros(n)
    lower[:] = coef[1:] * mid2
    upper[:] = coef[:-1] * mid2
    main[1:-1] = -(lower[:-1] + upper[1:]) - leak
    # first and last rows are replaced below
    lower[-1] = 0.0
    upper[0] = 0.0

    # sealed end: half control volume with zero flux through the boundary
    if bc.left is EndKind.SEALED:
        upper[0] = 2.0 * coef[0] * mid2[0]
        main[0] = -upper[0] - leak
    if bc.right is EndKind.SEALED:
        lower[-1] = 2.0 * coef[-1] * mid2[-1]
        main[-1] = -lower[-1] - leak
    return lower, main, upper


def assemble_spatial_operator(
    geom: DendriteGeometry,
    params: CableParams,
    grid: Grid1D,
    bc: Optional[BoundaryCondition] = None,
) -> sp.csr_matrix:
    """Tridiagonal matrix L with ``dV/dt = L V`` at the interior nodes.

    Interior rows use ``d_{i+-1/2} = d(x_i +- h/2)``.  A sealed end is a half
    control volume with zero boundary flux; a clamped end is a zero row (the
    value is held by the time integrator).
    """
    bc = bc or BoundaryCondition.sealed()
    _check_grid(geom, grid)
    lower, main, upper = _tridiagonal(geom, params, grid, bc)
    return sp.diags([lower, main, upper], [-1, 0, 1], format="csr")


def solve(
    geom: DendriteGeometry,
    params: CableParams,
    grid: Grid1D,
    bc: Optional[BoundaryCondition],
    V0,
    dt: float,
    t_end: float,
    save_every: int = 1,
) -> Field:
    """Crank-Nicolson integration ``(I - dt/2 L) V^{k+1} = (I + dt/2 L) V^k``.

    The number of steps is ``round(t_end / dt)`` and dt is adjusted so the last
    step lands on ``t_end``.  Every ``save_every``-th level is recorded, plus the
    initial and the final one.
    """
    bc = bc or BoundaryCondition.sealed()
    if not dt > 0 or not t_end > 0:
        raise ValueError("dt and t_end must be positive")
    V = np.array(V0, dtype=np.result_type(np.asarray(V0).dtype, float))
    if V.shape != (grid.n,) or not np.all(np.isfinite(V)):
        raise ValueError("V0 must be finite with one value per node")
    nsteps = max(1, int(round(t_end / dt)))
    dt = t_end / nsteps

    lower, main, upper = _tridiagonal(_checked(geom, grid), params, grid, bc)
    half = 0.5 * dt
    # implicit side; clamped rows become identity rows
    al, am, au = -half * lower, 1.0 - half * main, -half * upper
    ends = {0: (bc.left, bc.left_value), grid.n - 1: (bc.right, bc.right_value)}
    for i, (kind, _) in ends.items():
        if kind is EndKind.CLAMPED:
            am[i] = 1.0
            if i == 0:
                au[0] = 0.0
            else:
                al[-1] = 0.0

    dtype = V.dtype
    gttrf, gttrs = get_lapack_funcs(("gttrf", "gttrs"), (np.zeros(1, dtype=dtype),))
    dl, d, du, du2, ipiv, info = gttrf(al.astype(dtype), am.astype(dtype), au.astype(dtype))
    if info != 0:
        raise SolverError("singular Crank-Nicolson matrix", 0)

    def boundary_value(value_fn, t):
        return 0.0 if value_fn is None else value_fn(t)

    for i, (kind, fn) in ends.items():
        if kind is EndKind.CLAMPED:
            V[i] = boundary_value(fn, 0.0)

    times = [0.0]
    saved = [V.copy()]
    for k in range(1, nsteps + 1):
        rhs = V + half * (main * V)
        rhs[1:] += half * lower * V[:-1]
        rhs[:-1] += half * upper * V[1:]
        t = k * dt
        for i, (kind, fn) in ends.items():
            if kind is EndKind.CLAMPED:
                rhs[i] = boundary_value(fn, t)
        V, info = gttrs(dl, d, du, du2, ipiv, rhs)
        if info != 0 or not np.all(np.isfinite(V)):
            raise SolverError("linear solve failed", k)
        if k % save_every == 0 or k == nsteps:
            times.append(t)
            saved.append(V.copy())
    return Field(grid, np.array(times), np.array(saved))


def _checked(geom, grid):
    _check_grid(geom, grid)
    return geom


@dataclass(frozen=True)
class ResidualReport:
    pointwise: np.ndarray  # (nt - 2, n - 2), interior space-time points
    l2: float  # sqrt(h dt sum r^2)
    linf: float


def residual(geom: DendriteGeometry, params: CableParams, field: Field) -> ResidualReport:
    """Residual ``c_M V_t - (1/(4 r_L d)) (d^2 V_x)_x + V / r_M`` on interior points.

    Uses the expanded form ``d V_xx / (4 r_L) + d' V_x / (2 r_L)`` with the
    analytic slope ``d'`` and centred differences in both x and t.  The time
    derivative assumes (near) uniform spacing.
    """
    V = field.values
    nt, n = V.shape
    if nt < 3 or n < 5:
        raise ValueError("residual needs at least 3 time levels and 5 nodes")
    grid = field.grid
    x, h = grid.x, grid.h
    t = field.times
    xi = x[1:-1]
    d = diameter(geom, xi)
    dd = diameter_slope(geom, xi)

    Vc = V[1:-1, 1:-1]
    Vt = (V[2:, 1:-1] - V[:-2, 1:-1]) / (t[2:] - t[:-2])[:, None]
    Vx = (V[1:-1, 2:] - V[1:-1, :-2]) / (2 * h)
    Vxx = (V[1:-1, 2:] - 2 * Vc + V[1:-1, :-2]) / h**2
    r = params.c_M * Vt - (d * Vxx / (4 * params.r_L) + dd * Vx / (2 * params.r_L)) + Vc / params.r_M
    dt = float(np.mean(np.diff(t)))
    absr = np.abs(r)
    return ResidualReport(r, float(np.sqrt(h * dt * np.sum(absr**2))), float(absr.max()))


def sample(solution: Callable, grid: Grid1D, times) -> Field:
    """Evaluate a callable ``V(x, t)`` on the tensor grid ``times x grid.x``."""
    times = np.asarray(times, dtype=float)
    values = solution(grid.x[None, :], times[:, None])
    values = np.broadcast_to(values, (times.size, grid.n)).copy()
    return Field(grid, times, values)


def convergence_orders(errors) -> np.ndarray:
    """Observed orders ``log2(e_k / e_{k+1})`` for successive 2x refinements."""
    e = np.asarray(errors, dtype=float)
    return np.log2(e[:-1] / e[1:])


@dataclass(frozen=True)
class RefinementStudy:
    levels: tuple
    h: tuple
    dt: tuple
    norms: tuple
    orders: tuple

    @property
    def min_order(self) -> float:
        return float(min(self.orders))


def residual_refinement(
    geom: DendriteGeometry,
    params: CableParams,
    solution: Callable,
    t_span: tuple,
    levels: Iterable[int] = (201, 401, 801),
    x_span: Optional[tuple] = None,
) -> RefinementStudy:
    """Residual L2 norms of ``solution`` sampled on n x n space-time grids.

    Each level uses n points in x and n points in t, so h and dt halve together
    when n goes to 2n - 1.
    """
    x_span = x_span or (geom.x_min, geom.x_max)
    levels = tuple(int(n) for n in levels)
    norms, hs, dts = [], [], []
    for n in levels:
        grid = Grid1D(n, *x_span)
        times = np.linspace(t_span[0], t_span[1], n)
        rep = residual(geom, params, sample(solution, grid, times))
        norms.append(rep.l2)
        hs.append(grid.h)
        dts.append(times[1] - times[0])
    return RefinementStudy(levels, tuple(hs), tuple(dts), tuple(norms), tuple(convergence_orders(norms)))


def write_field_csv(field: Field, dest: Union[str, TextIO], comments: Iterable[str] = ()) -> None:
    """Write ``x,t,value_re[,value_im]`` rows, row-major over (t, x), 17 digits."""
    T, X = np.meshgrid(field.times, field.grid.x, indexing="ij")
    cols = [X.ravel(), T.ravel(), field.values.real.ravel()]
    header = "x,t,value_re"
    if field.is_complex:
        cols.append(field.values.imag.ravel())
        header += ",value_im"
    data = np.column_stack(cols)

    def _write(fh):
        for line in comments:
            fh.write(f"# {line}\n")
        fh.write(header + "\n")
        np.savetxt(fh, data, fmt="%.17g", delimiter=",")

    if isinstance(dest, str):
        with open(dest, "w", newline="") as fh:
            _write(fh)
    else:
        _write(dest)


def read_field_csv(path: str) -> Field:
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    header = lines[0].strip().split(",")
    data = np.loadtxt(lines[1:], delimiter=",", ndmin=2)
    x = np.unique(data[:, 0])
    t = np.unique(data[:, 1])
    values = data[:, 2].reshape(t.size, x.size)
    if "value_im" in header:
        values = values + 1j * data[:, 3].reshape(t.size, x.size)
    return Field(Grid1D(x.size, float(x[0]), float(x[-1])), t, values)
