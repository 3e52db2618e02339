"""Closed-form voltages for the three diameter regimes.

Every solution is a frozen, callable object ``V(x, t)`` that broadcasts like a
numpy ufunc.  Each is built the same way: a solution ``psi`` of a simpler
equation in a mapped variable ``z`` is multiplied by a peel-off factor.

=============  ====================  =====================================
regime         z                     V / psi
=============  ====================  =====================================
cylindrical    x                     exp(-t / tau)
parabolic      ln(1 + a x)           exp(-3 z / 2 - lam t)
general        z_general(x)          |z|**p exp(-t / tau)
=============  ====================  =====================================

with ``tau = r_M c_M``, ``lam = 9 a^2 d0 / (16 r_L c_M) + 1/tau`` and
``p = -3 nu / (4 (1 - nu/2))``.  ``psi`` solves ``psi_t = D psi_zz`` in the
first two cases and ``psi_t = D psi_zz - g psi / z^2`` in the third.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .geometry import (
    CableParams,
    DendriteGeometry,
    Regime,
    RegimeError,
    coupling_g,
    diffusivity,
    peel_exponent,
    z_general,
    z_parabolic,
)
from .special import bessel_j, bessel_n, order_for_nu

__all__ = [
    "HeatKernel",
    "CosineMode",
    "ConstantMode",
    "PeelOff",
    "peel_off",
    "mapped_coordinate",
    "CableSolution",
    "cylindrical_mode",
    "cylindrical_kernel",
    "ParabolicSolution",
    "parabolic_solution",
    "ModeSpec",
    "BesselMode",
    "general_solution",
    "alternate_bessel_form",
    "EquivalenceReport",
    "equivalence_nu0_nu45",
]


# -- solutions of the free diffusion equation psi_t = D psi_zz ---------------


@dataclass(frozen=True)
class HeatKernel:
    """``(4 pi D (t + t0))**-1/2 exp(-(z - center)**2 / (4 D (t + t0)))``."""

    diffusivity: float
    t0: float = 1.0
    center: float = 0.0

    def __call__(self, z, t):
        s = 4.0 * self.diffusivity * (np.asarray(t, dtype=float) + self.t0)
        if np.any(s <= 0):
            raise ValueError("heat kernel evaluated at t + t0 <= 0")
        return np.exp(-((np.asarray(z) - self.center) ** 2) / s) / np.sqrt(math.pi * s)


@dataclass(frozen=True)
class CosineMode:
    """``exp(-D k^2 t) cos(k z + phase)``."""

    diffusivity: float
    k: float
    phase: float = 0.0

    def __call__(self, z, t):
        return np.exp(-self.diffusivity * self.k**2 * np.asarray(t)) * np.cos(self.k * np.asarray(z) + self.phase)


@dataclass(frozen=True)
class ConstantMode:
    value: float = 1.0
    diffusivity: Optional[float] = None

    def __call__(self, z, t):
        return np.full(np.broadcast(np.asarray(z), np.asarray(t)).shape, self.value, dtype=float)


# -- peel-off factors ---------------------------------------------------------


@dataclass(frozen=True)
class PeelOff:
    """Factor ``V / psi`` as a function of the mapped variable and time.

    ``kind`` is ``"leak"`` (exp(-rate t)), ``"exponential"``
    (exp(spatial z - rate t)) or ``"power"`` (|z|**spatial exp(-rate t)).
    """

    kind: str
    spatial: float
    rate: float

    def __call__(self, z, t):
        z = np.asarray(z, dtype=float)
        decay = np.exp(-self.rate * np.asarray(t, dtype=float))
        if self.kind == "leak":
            return decay * np.ones_like(z)
        if self.kind == "exponential":
            return np.exp(self.spatial * z) * decay
        return np.abs(z) ** self.spatial * decay


def peel_off(geom: DendriteGeometry, params: CableParams, power_map: bool = False) -> PeelOff:
    """Peel-off factor for the geometry.

    ``power_map=True`` selects the power-law factor whenever the change of
    variable exists, including ``nu = 0`` with ``a != 0`` (where it is 1).
    """
    leak = 1.0 / params.tau
    regime = geom.regime
    if regime is Regime.PARABOLIC:
        rate = 9.0 * geom.a**2 * geom.d0 / (16.0 * params.r_L * params.c_M) + leak
        return PeelOff("exponential", -1.5, rate)
    if regime is Regime.GENERAL or (power_map and geom.has_z_map):
        return PeelOff("power", peel_exponent(geom.nu), leak)
    return PeelOff("leak", 0.0, leak)


def mapped_coordinate(geom: DendriteGeometry, x, power_map: bool = False):
    regime = geom.regime
    if regime is Regime.PARABOLIC:
        return z_parabolic(geom, x)
    if regime is Regime.GENERAL or (power_map and geom.has_z_map):
        return z_general(geom, x)
    return np.asarray(x, dtype=float)


def _check_diffusivity(psi, expected: float):
    d = getattr(psi, "diffusivity", None)
    if d is not None and not math.isclose(d, expected, rel_tol=1e-12):
        raise ValueError(f"psi diffuses with D = {d}, the mapped equation needs D = {expected}")


# -- cylindrical --------------------------------------------------------------


@dataclass(frozen=True)
class CableSolution:
    """``V = exp(-t / tau) psi(x, t)`` for a constant diameter."""

    geom: DendriteGeometry
    params: CableParams
    psi: Callable

    def __call__(self, x, t):
        return np.exp(-np.asarray(t, dtype=float) / self.params.tau) * self.psi(x, t)


def _require_cylinder(geom):
    if geom.regime is not Regime.CYLINDRICAL:
        raise RegimeError(f"needs a constant diameter, got {geom.regime.value}")


def cylindrical_mode(params: CableParams, geom: DendriteGeometry, k: float) -> CableSolution:
    """``exp(-t/tau) exp(-D k^2 t) cos(k x)`` with ``D = d0 / (4 r_L c_M)``."""
    _require_cylinder(geom)
    return CableSolution(geom, params, CosineMode(diffusivity(geom, params), k))


def cylindrical_kernel(params: CableParams, geom: DendriteGeometry, t0: float = 1.0, center: float = 0.0):
    """Leaky heat kernel ``exp(-t/tau) (4 pi D (t+t0))**-1/2 exp(-(x-center)^2 / (4 D (t+t0)))``."""
    _require_cylinder(geom)
    return CableSolution(geom, params, HeatKernel(diffusivity(geom, params), t0, center))


# -- parabolic ----------------------------------------------------------------


@dataclass(frozen=True)
class ParabolicSolution:
    geom: DendriteGeometry
    params: CableParams
    psi: Callable

    def __call__(self, x, t):
        z = z_parabolic(self.geom, x)
        return peel_off(self.geom, self.params)(z, t) * self.psi(z, t)


def parabolic_solution(params: CableParams, geom: DendriteGeometry, psi: Callable) -> ParabolicSolution:
    """``V = exp(-3z/2 - lam t) psi(z, t)`` with ``z = ln(1 + a x)``.

    ``psi`` must solve ``psi_t = (a^2 d0 / (4 c_M r_L)) psi_zz``; objects that
    carry a ``diffusivity`` attribute are checked against it.
    """
    if geom.regime is not Regime.PARABOLIC:
        raise RegimeError(f"parabolic_solution needs nu = 2 and a != 0, got {geom.regime.value}")
    _check_diffusivity(psi, diffusivity(geom, params))
    return ParabolicSolution(geom, params, psi)


# -- general nu: Bessel modes -------------------------------------------------


@dataclass(frozen=True)
class ModeSpec:
    E: float
    A: float = 1.0
    B: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.E) and self.E >= 0):
            raise ValueError("E must be finite and >= 0")
        if self.A == 0 and self.B == 0:
            raise ValueError("A and B cannot both vanish")


@dataclass(frozen=True)
class BesselMode:
    """``|z|**(p + 1/2) exp(-(E + 1/tau) t) [A J_alpha(kappa |z|) + B N_alpha(kappa |z|)]``.

    With ``E = 0`` the spatial factor is the power-law pair
    ``A |z|**(p+1/2+alpha) + B |z|**(p+1/2-alpha)`` (``|z|**(p+1/2) ln|z|`` for
    the B branch when alpha = 0).
    """

    geom: DendriteGeometry
    params: CableParams
    mode: ModeSpec

    @property
    def order(self) -> float:
        return order_for_nu(self.geom.nu)

    @property
    def kappa(self) -> float:
        return math.sqrt(self.mode.E / diffusivity(self.geom, self.params))

    def spatial(self, z):
        s = np.abs(np.asarray(z, dtype=float))
        alpha, mode = self.order, self.mode
        pre = s ** (peel_exponent(self.geom.nu) + 0.5)
        if mode.E == 0:
            out = mode.A * s**alpha
            if mode.B:
                out = out + mode.B * (s**-alpha if alpha > 0 else np.log(s))
            return pre * out
        arg = self.kappa * s
        out = mode.A * bessel_j(alpha, arg)
        if mode.B:
            out = out + mode.B * bessel_n(alpha, arg)
        return pre * out

    def __call__(self, x, t):
        z = z_general(self.geom, x)
        rate = self.mode.E + 1.0 / self.params.tau
        return self.spatial(z) * np.exp(-rate * np.asarray(t, dtype=float))


def general_solution(params: CableParams, geom: DendriteGeometry, mode: ModeSpec) -> BesselMode:
    """Separable Bessel-mode voltage for any geometry with a non-singular z-map."""
    if not geom.has_z_map:
        raise RegimeError("general_solution needs a != 0 and nu != 2")
    order_for_nu(geom.nu)
    return BesselMode(geom, params, mode)


@dataclass(frozen=True)
class _AlternateForm:
    geom: DendriteGeometry
    params: CableParams
    mode: ModeSpec

    def __call__(self, x, t):
        g, p, m = self.geom, self.params, self.mode
        u = 1.0 + g.a * np.asarray(x, dtype=float)
        kappa = math.sqrt(4 * p.c_M * p.r_L * m.E / g.d0)
        w = np.abs(u ** (g.nu - 0.5) / (g.a * (g.nu / 2 - 1)))
        alpha = order_for_nu(g.nu)
        br = m.A * bessel_j(alpha, kappa * w)
        if m.B:
            br = br + m.B * bessel_n(alpha, kappa * w)
        decay = np.exp(-(m.E + 1.0 / (p.c_M * p.r_L)) * np.asarray(t, dtype=float))
        return u ** ((1 + g.nu) / 2) * decay * br


def alternate_bessel_form(params: CableParams, geom: DendriteGeometry, mode: ModeSpec) -> Callable:
    """The competing closed form ``(1+ax)**((1+nu)/2) exp(-(E + 1/(c_M r_L)) t)
    [A J_alpha(kappa w) + B N_alpha(kappa w)]``, ``w = (1+ax)**(nu-1/2) / (a (nu/2-1))``.

    Kept only for diagnostics; ``|w|`` is used so that it can be evaluated at
    all.  :class:`BesselMode` is the form that satisfies the cable equation.
    """
    if not geom.has_z_map:
        raise RegimeError("needs a != 0 and nu != 2")
    return _AlternateForm(geom, params, mode)


# -- nu = 0 versus nu = 4/5 ---------------------------------------------------


@dataclass(frozen=True)
class EquivalenceReport:
    diffusivity_nu0: float
    diffusivity_nu45: float
    coupling_nu0: float
    coupling_nu45: float
    exponent_nu0: float
    exponent_nu45: float
    max_ratio_error: float  # max |V_45 / V_0 - z**(p45 - p0)| / z**(p45 - p0) at matched z

    @property
    def same_equation(self) -> bool:
        return self.diffusivity_nu0 == self.diffusivity_nu45 and self.coupling_nu0 == 0 == self.coupling_nu45


def equivalence_nu0_nu45(params: CableParams, d0: float = 1.0, a: float = 1.0, mode: Optional[ModeSpec] = None) -> EquivalenceReport:
    """Compare the cylinder (nu = 0) with the cone nu = 4/5.

    Both reduce to the same free equation for psi; the voltages differ only by
    the power ``|z|**p`` of the peel-off.  The check evaluates the Bessel mode of
    each geometry at points with equal ``z``.
    """
    mode = mode or ModeSpec(E=0.5)
    g0 = DendriteGeometry(d0, a, 0.0, 0.0, 1.0)
    g45 = DendriteGeometry(d0, a, 0.8, 0.0, 1.0)
    z = np.linspace(*sorted((z_general(g45, 0.0), z_general(g45, 1.0))), 41)
    q0, q45 = 1.0, 1.0 - 0.8 / 2
    x0 = ((a * q0 * z) ** (1 / q0) - 1) / a
    x45 = ((a * q45 * z) ** (1 / q45) - 1) / a
    p0, p45 = peel_exponent(0.0), peel_exponent(0.8)
    v0 = general_solution(params, g0, mode)(x0, 0.3)
    v45 = general_solution(params, g45, mode)(x45, 0.3)
    predicted = np.abs(z) ** (p45 - p0)
    err = float(np.max(np.abs(v45 / v0 - predicted) / predicted))
    return EquivalenceReport(
        diffusivity(g0, params),
        diffusivity(g45, params),
        coupling_g(g0, params),
        coupling_g(g45, params),
        p0,
        p45,
        err,
    )
