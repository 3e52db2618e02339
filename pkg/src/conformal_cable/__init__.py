"""Passive cable equation on power-law dendrites, its closed-form solutions,
conformal symmetry maps and the finite-difference symmetry algebra."""

__version__ = "0.1.0"

from .geometry import (
    CableParams,
    DendriteGeometry,
    DomainError,
    Regime,
    RegimeError,
    classify,
    coupling_g,
    diameter,
    effective_mass,
    z_general,
    z_parabolic,
)
from .pde import BoundaryCondition, Field, Grid1D, SolverError, residual, solve
from .solutions import ModeSpec, cylindrical_mode, general_solution, parabolic_solution
from .special import bessel_j, bessel_n, order_for_nu
from .symmetry import ConformalMap, RestrictedConformalMap, transform

__all__ = [
    "__version__",
    "CableParams",
    "DendriteGeometry",
    "DomainError",
    "Regime",
    "RegimeError",
    "classify",
    "coupling_g",
    "diameter",
    "effective_mass",
    "z_general",
    "z_parabolic",
    "BoundaryCondition",
    "Field",
    "Grid1D",
    "SolverError",
    "residual",
    "solve",
    "ModeSpec",
    "cylindrical_mode",
    "general_solution",
    "parabolic_solution",
    "bessel_j",
    "bessel_n",
    "order_for_nu",
    "ConformalMap",
    "RestrictedConformalMap",
    "transform",
]
