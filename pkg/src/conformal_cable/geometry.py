"""Dendrite geometry d(x) = d0 (1 + a x)**nu and the coordinate changes tied to it.

Three regimes are distinguished:

* cylindrical: ``nu == 0`` or ``a == 0`` (constant diameter),
* parabolic: ``nu == 2``, where ``1 + a x = exp(z)`` maps the cable onto a
  free diffusion in ``z``,
* general: everything else, where ``z = (1 + a x)**(1 - nu/2) / (a (1 - nu/2))``
  maps the cable onto diffusion with an inverse-square potential.

All quantities are taken in one consistent unit system; nothing is converted.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "DomainError",
    "RegimeError",
    "Regime",
    "CableParams",
    "DendriteGeometry",
    "classify",
    "diameter",
    "diameter_slope",
    "z_general",
    "z_parabolic",
    "x_from_z_general",
    "peel_exponent",
    "effective_mass",
    "coupling_g",
    "diffusivity",
]

PARABOLIC_TOL = 1e-9


class DomainError(ValueError):
    """Point outside the region where ``1 + a x > 0``."""


class RegimeError(ValueError):
    """Operation not defined for the geometry's regime."""


class Regime(enum.Enum):
    CYLINDRICAL = "cylindrical"
    PARABOLIC = "parabolic"
    GENERAL = "general"


def classify(a: float, nu: float) -> Regime:
    """Regime tag as a pure function of ``(a, nu)``."""
    if a == 0.0 or nu == 0.0:
        return Regime.CYLINDRICAL
    if abs(nu - 2.0) < PARABOLIC_TOL:
        return Regime.PARABOLIC
    return Regime.GENERAL


@dataclass(frozen=True)
class CableParams:
    """Membrane capacitance ``c_M``, membrane resistance ``r_M`` and
    longitudinal resistance ``r_L``."""

    c_M: float
    r_M: float
    r_L: float

    def __post_init__(self):
        for name in ("c_M", "r_M", "r_L"):
            val = getattr(self, name)
            if not (math.isfinite(val) and val > 0):
                raise ValueError(f"{name} must be finite and positive, got {val!r}")

    @property
    def tau(self) -> float:
        """Membrane time constant ``r_M c_M``."""
        return self.r_M * self.c_M


@dataclass(frozen=True)
class DendriteGeometry:
    d0: float
    a: float
    nu: float
    x_min: float
    x_max: float

    def __post_init__(self):
        for name in ("d0", "a", "nu", "x_min", "x_max"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.d0 <= 0:
            raise ValueError(f"d0 must be positive, got {self.d0}")
        if not self.x_min < self.x_max:
            raise ValueError("x_min must be smaller than x_max")
        # 1 + a x is affine, so checking both ends covers the interval
        for x in (self.x_min, self.x_max):
            if 1.0 + self.a * x <= 0:
                raise DomainError(
                    f"1 + a*x = {1.0 + self.a * x} <= 0 at x = {x}; "
                    "the domain must keep the diameter base positive"
                )

    @property
    def regime(self) -> Regime:
        return classify(self.a, self.nu)

    @property
    def has_z_map(self) -> bool:
        """True when the power-law change of variable is non-singular."""
        return self.a != 0.0 and abs(self.nu - 2.0) >= PARABOLIC_TOL


def _base(geom: DendriteGeometry, x):
    u = 1.0 + geom.a * np.asarray(x, dtype=float)
    if np.any(u <= 0):
        raise DomainError("1 + a*x <= 0: diameter undefined")
    return u


def diameter(geom: DendriteGeometry, x):
    """``d0 (1 + a x)**nu``."""
    u = _base(geom, x)
    return geom.d0 * u**geom.nu


def diameter_slope(geom: DendriteGeometry, x):
    """Analytic derivative ``d'(x) = d0 nu a (1 + a x)**(nu - 1)``."""
    u = _base(geom, x)
    return geom.d0 * geom.nu * geom.a * u ** (geom.nu - 1.0)


def _require_z_map(geom: DendriteGeometry):
    if geom.a == 0.0:
        raise RegimeError("change of variable is singular for a = 0")
    if abs(geom.nu - 2.0) < PARABOLIC_TOL:
        raise RegimeError("change of variable is singular for nu = 2; use z_parabolic")


def z_general(geom: DendriteGeometry, x):
    """``(1 + a x)**(1 - nu/2) / (a (1 - nu/2))``.

    Accepted whenever the map is non-singular (``a != 0``, ``nu != 2``), which
    includes the constant-diameter case ``nu = 0`` where it reduces to
    ``(1 + a x)/a``.
    """
    _require_z_map(geom)
    q = 1.0 - geom.nu / 2.0
    return _base(geom, x) ** q / (geom.a * q)


def x_from_z_general(geom: DendriteGeometry, z):
    """Inverse of :func:`z_general` using ``|z|``.

    The transformed equations are even in ``z``, so only the magnitude matters;
    the returned ``x`` always satisfies ``1 + a x > 0``.
    """
    _require_z_map(geom)
    q = 1.0 - geom.nu / 2.0
    s = np.abs(np.asarray(z, dtype=float))
    return np.expm1(np.log(abs(geom.a * q) * s) / q) / geom.a


def z_parabolic(geom: DendriteGeometry, x):
    """``ln(1 + a x)`` for the parabolic profile."""
    if geom.regime is not Regime.PARABOLIC:
        raise RegimeError(f"z_parabolic needs nu = 2 and a != 0, got {geom.regime.value}")
    _base(geom, x)
    return np.log1p(geom.a * np.asarray(x, dtype=float))


def peel_exponent(nu: float) -> float:
    """Power ``p = -3 nu / (4 (1 - nu/2))`` of ``z`` removed from the voltage."""
    if abs(nu - 2.0) < PARABOLIC_TOL:
        raise RegimeError("no power-law peel-off at nu = 2")
    return -3.0 * nu / (4.0 * (1.0 - nu / 2.0)) + 0.0


def diffusivity(geom: DendriteGeometry, params: CableParams) -> float:
    """Diffusion constant of the free (or conformal) equation in the mapped variable."""
    base = geom.d0 / (4.0 * params.r_L * params.c_M)
    if geom.regime is Regime.PARABOLIC:
        return geom.a**2 * base
    return base


def effective_mass(geom: DendriteGeometry, params: CableParams) -> float:
    """Mass-like constant ``1 / (2 * diffusivity)``.

    ``2 r_L c_M / d0`` for cylindrical and general profiles,
    ``2 r_L c_M / (d0 a**2)`` for the parabolic profile.
    """
    m = 2.0 * params.r_L * params.c_M / geom.d0
    if geom.regime is Regime.PARABOLIC:
        return m / geom.a**2
    return m


def coupling_g(geom: DendriteGeometry, params: CableParams) -> float:
    """Inverse-square coupling ``3 d0 nu (5 nu - 4) / (16 r_L c_M (2 - nu)**2)``."""
    nu = geom.nu
    if abs(nu - 2.0) < PARABOLIC_TOL:
        raise RegimeError("coupling undefined for the parabolic profile")
    if geom.a == 0.0 and nu != 0.0:
        raise RegimeError("a = 0 is a cylinder; the coupling formula does not apply")
    return 3.0 * geom.d0 * nu * (5.0 * nu - 4.0) / (16.0 * params.r_L * params.c_M * (2.0 - nu) ** 2) + 0.0
