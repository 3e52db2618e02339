"""Conformal (Schrodinger-group) maps acting on cable-equation solutions.

A map is ``t' = (alpha t + beta) / (gamma t + delta)`` together with
``x' = (l x + v t + c) / (gamma t + delta)``, ``l**2 = alpha delta - beta gamma``.
It acts on free-diffusion solutions ``psi_t = D psi_zz`` by

    psi'(z', t') = sqrt|gamma t + delta| exp(-(m/2) phi(z, t)) psi(z, t),  m = 1/(2D)

and the cable transforms are obtained by stripping the regime's peel-off
factor, transforming ``psi`` in the mapped variable and re-attaching the
factor at the primed point.  Transformed solutions are callables in the
primed coordinates: the map is inverted pointwise, nothing is interpolated.

With an inverse-square potential (the general regime) only the maps with
``v = c = 0`` survive.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .geometry import (
    CableParams,
    DendriteGeometry,
    DomainError,
    Regime,
    RegimeError,
    effective_mass,
    peel_exponent,
    x_from_z_general,
    z_general,
    z_parabolic,
)
from .pde import NonFiniteFieldError, RefinementStudy, residual_refinement

__all__ = [
    "SingularTimeError",
    "ConformalMap",
    "RestrictedConformalMap",
    "map_coords_cylindrical",
    "phase_phi",
    "transform_cylindrical",
    "transform_parabolic",
    "transform_general",
    "transform",
    "random_map",
    "competing_transform",
    "InvarianceResult",
    "check_invariance",
    "CompetingFormDiagnostic",
    "compare_competing_form",
    "write_invariance_csv",
]


class SingularTimeError(DomainError):
    """``gamma t + delta`` vanishes (or changes sign) where the map is used."""


@dataclass(frozen=True)
class ConformalMap:
    alpha: float = 1.0
    beta: float = 0.0
    gamma: float = 0.0
    delta: float = 1.0
    l: float = 1.0
    v: float = 0.0
    c: float = 0.0

    def __post_init__(self):
        vals = (self.alpha, self.beta, self.gamma, self.delta, self.l, self.v, self.c)
        if not all(math.isfinite(p) for p in vals):
            raise ValueError("map parameters must be finite")
        det = self.alpha * self.delta - self.beta * self.gamma
        if det == 0 or self.l == 0:
            raise ValueError("alpha*delta - beta*gamma must be nonzero")
        if not math.isclose(self.l**2, det, rel_tol=1e-10, abs_tol=0.0):
            raise ValueError(f"l**2 = {self.l**2} differs from alpha*delta - beta*gamma = {det}")

    @classmethod
    def identity(cls):
        return cls()

    @classmethod
    def from_mobius(cls, alpha, beta, gamma, delta, v=0.0, c=0.0, sign=1):
        """Build a map choosing ``l = sign * sqrt(alpha delta - beta gamma)``."""
        det = alpha * delta - beta * gamma
        if det <= 0:
            raise ValueError("real l needs alpha*delta - beta*gamma > 0")
        return cls(alpha, beta, gamma, delta, math.copysign(math.sqrt(det), sign), v, c)

    @property
    def is_restricted(self) -> bool:
        return self.v == 0 and self.c == 0

    def denominator(self, t):
        den = self.gamma * np.asarray(t, dtype=float) + self.delta
        if np.any(den == 0):
            raise SingularTimeError("gamma*t + delta = 0")
        return den

    def forward(self, x, t):
        """``(x, t) -> (x', t')``."""
        t = np.asarray(t, dtype=float)
        den = self.denominator(t)
        return (self.l * np.asarray(x) + self.v * t + self.c) / den, (self.alpha * t + self.beta) / den

    def inverse(self, xp, tp):
        """``(x', t') -> (x, t)``."""
        tp = np.asarray(tp, dtype=float)
        back = self.alpha - self.gamma * tp
        if np.any(back == 0):
            raise SingularTimeError("primed time maps to t = infinity")
        t = (self.delta * tp - self.beta) / back
        den = self.denominator(t)
        return (den * np.asarray(xp) - self.v * t - self.c) / self.l, t

    def compose(self, first: "ConformalMap") -> "ConformalMap":
        """The map ``self o first`` (apply ``first``, then ``self``)."""
        a1, b1, g1, d1 = first.alpha, first.beta, first.gamma, first.delta
        a2, b2, g2, d2 = self.alpha, self.beta, self.gamma, self.delta
        return ConformalMap(
            a2 * a1 + b2 * g1,
            a2 * b1 + b2 * d1,
            g2 * a1 + d2 * g1,
            g2 * b1 + d2 * d1,
            first.l * self.l,
            self.l * first.v + self.v * a1 + self.c * g1,
            self.l * first.c + self.v * b1 + self.c * d1,
        )

    def as_restricted(self) -> "RestrictedConformalMap":
        if not self.is_restricted:
            raise RegimeError("translations and boosts (v, c) are not symmetries here")
        return RestrictedConformalMap(self.alpha, self.beta, self.gamma, self.delta, self.l)

    def params(self) -> dict:
        return {k: getattr(self, k) for k in ("alpha", "beta", "gamma", "delta", "l", "v", "c")}


@dataclass(frozen=True)
class RestrictedConformalMap(ConformalMap):
    """Conformal map with ``v = c = 0`` enforced."""

    def __post_init__(self):
        super().__post_init__()
        if self.v != 0 or self.c != 0:
            raise ValueError("restricted maps have v = c = 0")

    def compose(self, first: ConformalMap) -> ConformalMap:
        out = super().compose(first)
        return out.as_restricted() if out.is_restricted else out


def map_coords_cylindrical(cmap: ConformalMap, x, t):
    return cmap.forward(x, t)


def phase_phi(cmap: ConformalMap, z, t):
    """``(2 l v z + v^2 t - gamma (l z + v t + c)^2 / (gamma t + delta)) / l^2``."""
    t = np.asarray(t, dtype=float)
    z = np.asarray(z, dtype=float)
    den = cmap.denominator(t)
    lin = cmap.l * z + cmap.v * t + cmap.c
    return (2 * cmap.l * cmap.v * z + cmap.v**2 * t - cmap.gamma * lin**2 / den) / cmap.l**2


# -- transformed solutions ---------------------------------------------------


@dataclass(frozen=True)
class _Cylindrical:
    cmap: ConformalMap
    params: CableParams
    mass: float
    V: Callable

    def __call__(self, xp, tp):
        x, t = self.cmap.inverse(xp, tp)
        den = self.cmap.denominator(t)
        expo = -(np.asarray(tp) - t) / self.params.tau - 0.5 * self.mass * phase_phi(self.cmap, x, t)
        return np.sqrt(np.abs(den)) * np.exp(expo) * self.V(x, t)


@dataclass(frozen=True)
class _Parabolic:
    cmap: ConformalMap
    geom: DendriteGeometry
    params: CableParams
    mass: float
    rate: float
    V: Callable

    def __call__(self, xp, tp):
        zp = z_parabolic(self.geom, xp)
        z, t = self.cmap.inverse(zp, tp)
        x = np.where(z == zp, xp, np.expm1(z) / self.geom.a)
        den = self.cmap.denominator(t)
        expo = (
            -1.5 * (zp - z)
            - self.rate * (np.asarray(tp) - t)
            - 0.5 * self.mass * phase_phi(self.cmap, z, t)
        )
        return np.sqrt(np.abs(den)) * np.exp(expo) * self.V(x, t)


@dataclass(frozen=True)
class _General:
    cmap: ConformalMap
    geom: DendriteGeometry
    params: CableParams
    mass: float
    V: Callable

    def __call__(self, xp, tp):
        cm = self.cmap
        sp = np.abs(z_general(self.geom, xp))
        _, t = cm.inverse(0.0, tp)
        den = cm.denominator(t)
        scale = np.abs(den / cm.l)
        # fixed points keep x' itself, so the identity map is exact
        x = np.where(scale == 1, xp, x_from_z_general(self.geom, scale * sp))
        s = scale * sp
        expo = -(np.asarray(tp) - t) / self.params.tau + 0.5 * self.mass * cm.gamma * s**2 / den
        p = peel_exponent(self.geom.nu)
        return np.sqrt(np.abs(den)) * scale ** (-p) * np.exp(expo) * self.V(x, t)


def transform_cylindrical(cmap: ConformalMap, geom: DendriteGeometry, params: CableParams, V: Callable) -> Callable:
    """Image of a constant-diameter solution ``V`` under ``cmap``.

    ``V'(x', t') = sqrt|gamma t + delta| exp(-(t' - t)/tau - (m/2) phi(x, t)) V(x, t)``
    with ``m = 2 r_L c_M / d0`` and ``(x, t)`` the preimage of ``(x', t')``.
    """
    if geom.regime is not Regime.CYLINDRICAL:
        raise RegimeError(f"transform_cylindrical needs a constant diameter, got {geom.regime.value}")
    return _Cylindrical(cmap, params, effective_mass(geom, params), V)


def transform_parabolic(cmap: ConformalMap, geom: DendriteGeometry, params: CableParams, V: Callable) -> Callable:
    """Image of a parabolic-profile solution; the map acts on ``z = ln(1 + a x)``."""
    if geom.regime is not Regime.PARABOLIC:
        raise RegimeError(f"transform_parabolic needs nu = 2, got {geom.regime.value}")
    rate = 9.0 * geom.a**2 * geom.d0 / (16.0 * params.r_L * params.c_M) + 1.0 / params.tau
    return _Parabolic(cmap, geom, params, effective_mass(geom, params), rate, V)


def transform_general(cmap: ConformalMap, geom: DendriteGeometry, params: CableParams, V: Callable) -> Callable:
    """Image of a general-profile solution under a map with ``v = c = 0``.

    ``V'(x', t') = sqrt|den| |l/den|**p exp(-(t' - t)/tau + (m0/2) gamma z^2 / den) V(x, t)``
    where ``den = gamma t + delta``, ``z = den z'/l`` and ``p`` is the peel-off
    power.  Only ``|z|`` enters, so ``x`` is recovered from ``|z|``.
    """
    if not geom.has_z_map:
        raise RegimeError("transform_general needs a != 0 and nu != 2")
    if not cmap.is_restricted:
        raise RegimeError("v and c must vanish: the inverse-square potential breaks boosts and translations")
    return _General(cmap, geom, params, effective_mass(geom, params), V)


def transform(cmap: ConformalMap, geom: DendriteGeometry, params: CableParams, V: Callable) -> Callable:
    """Dispatch on the geometry's regime."""
    regime = geom.regime
    if regime is Regime.CYLINDRICAL:
        return transform_cylindrical(cmap, geom, params, V)
    if regime is Regime.PARABOLIC:
        return transform_parabolic(cmap, geom, params, V)
    return transform_general(cmap, geom, params, V)


# -- random maps -------------------------------------------------------------


def random_map(
    rng: np.random.Generator,
    t_window: tuple,
    restricted: bool = False,
    bound: float = 2.0,
    den_range: tuple = (0.2, 5.0),
    min_det: float = 0.25,
    max_preimage_t: float = 10.0,
    max_tries: int = 10_000,
) -> ConformalMap:
    """Draw a map with parameters uniform in ``[-bound, bound]``.

    Draws are rejected until, on the primed time window, ``gamma t + delta``
    keeps one sign with ``|gamma t + delta|`` inside ``den_range``, the
    preimage times stay within ``max_preimage_t`` and ``l**2 >= min_det``.
    """
    tp = np.asarray(t_window, dtype=float)
    for _ in range(max_tries):
        alpha, beta, gamma, delta, v, c = rng.uniform(-bound, bound, 6)
        sign = 1 if rng.uniform() < 0.5 else -1
        det = alpha * delta - beta * gamma
        if det < min_det:
            continue
        back = alpha - gamma * tp
        if back[0] * back[1] <= 0:
            continue
        den = det / back  # gamma t + delta at the preimage, monotone in t'
        if np.any(np.abs(den) < den_range[0]) or np.any(np.abs(den) > den_range[1]):
            continue
        t = (delta * tp - beta) / back
        if np.any(np.abs(t) > max_preimage_t):
            continue
        if restricted:
            return RestrictedConformalMap.from_mobius(alpha, beta, gamma, delta, sign=sign)
        return ConformalMap.from_mobius(alpha, beta, gamma, delta, v, c, sign=sign)
    raise RuntimeError("no admissible map found; loosen the constraints")


# -- competing closed forms (diagnostics only) -------------------------


@dataclass(frozen=True)
class _CompetingCylindrical:
    cmap: ConformalMap
    params: CableParams
    geom: DendriteGeometry
    V: Callable

    def __call__(self, xp, tp):
        cm, p = self.cmap, self.params
        x, t = cm.inverse(xp, tp)
        lit_den = cm.delta * t + cm.delta
        expo = (-cm.gamma * t**2 + (cm.alpha - cm.delta) * t + cm.beta) / lit_den
        weight = p.c_M * p.r_L / self.geom.d0
        return np.sqrt(np.abs(cm.denominator(t))) * np.exp(expo - weight * phase_phi(cm, x, t)) * self.V(x, t)


@dataclass(frozen=True)
class _CompetingParabolic:
    cmap: ConformalMap
    params: CableParams
    geom: DendriteGeometry
    V: Callable

    def __call__(self, xp, tp):
        cm, p, g = self.cmap, self.params, self.geom
        z, t = cm.inverse(z_parabolic(g, xp), tp)
        x = np.expm1(z) / g.a
        den = cm.denominator(t)
        k = p.c_M * p.r_L / (g.a**2 * g.d0)
        power = -(1.5 * cm.l / den + 4 * k * cm.v / cm.l)
        rate = 2 * k * cm.v**2 / cm.l**2 + 9 * g.d0 * g.a**2 / (16 * p.r_L * p.c_M) + 1 / p.tau
        quad = 2 * k * cm.gamma / (cm.l**2 * den) * (cm.l * z + cm.v * t + cm.c) ** 2
        big_phi = -(1.5 * (cm.v * t + cm.c) / den + rate * t - quad)
        return np.sqrt(np.abs(den)) * np.exp(power * z + big_phi) * self.V(x, t)


@dataclass(frozen=True)
class _CompetingGeneral:
    cmap: ConformalMap
    params: CableParams
    geom: DendriteGeometry
    V: Callable

    def __call__(self, xp, tp):
        cm, p, g = self.cmap, self.params, self.geom
        sp = np.abs(z_general(g, xp))
        _, t = cm.inverse(0.0, tp)
        den = cm.denominator(t)
        x = x_from_z_general(g, np.abs(den / cm.l) * sp)
        u = 1 + g.a * x
        nu = g.nu
        pre = np.abs(den) ** ((1 + nu) / (2 - nu)) / abs(g.a) ** (3 * nu / (2 * (2 - nu)))
        decay = -(np.asarray(tp) - t) / p.tau
        gauss = 4 * cm.gamma * g.d0 / (g.a**2 * p.r_M * p.c_M) * u ** (2 - nu) / (den * (2 - nu) ** 2)
        return pre * np.exp(decay + gauss) * self.V(x, t)


def competing_transform(cmap: ConformalMap, geom: DendriteGeometry, params: CableParams, V: Callable) -> Callable:
    """Transformed voltage evaluated from the competing closed forms.

    These are kept as diagnostics against :func:`transform`; in particular
    the constant-diameter form uses ``delta t + delta`` and omits the
    leak rate, the parabolic form weights the phase with the full mass,
    and the general form uses a different Gaussian coefficient.
    """
    regime = geom.regime
    if regime is Regime.CYLINDRICAL:
        return _CompetingCylindrical(cmap, params, geom, V)
    if regime is Regime.PARABOLIC:
        return _CompetingParabolic(cmap, params, geom, V)
    if not cmap.is_restricted:
        raise RegimeError("v and c must vanish")
    return _CompetingGeneral(cmap, params, geom, V)


# -- verification ------------------------------------------------------------

MIN_ORDER = 1.8


@dataclass(frozen=True)
class InvarianceResult:
    cmap: ConformalMap
    regime: Regime
    study: RefinementStudy
    min_order: float = MIN_ORDER

    @property
    def passed(self) -> bool:
        orders = np.asarray(self.study.orders)
        return bool(np.all(np.isfinite(orders)) and orders.min() >= self.min_order)


def check_invariance(
    cmap: ConformalMap,
    geom: DendriteGeometry,
    params: CableParams,
    V: Callable,
    t_window: tuple,
    levels: Sequence[int] = (201, 401, 801),
    x_window: Optional[tuple] = None,
    transformed: Optional[Callable] = None,
) -> InvarianceResult:
    """Residual refinement of the transformed solution on a primed window."""
    Vp = transformed if transformed is not None else transform(cmap, geom, params, V)
    try:
        with np.errstate(over="ignore", invalid="ignore"):
            study = residual_refinement(geom, params, Vp, t_window, levels, x_window)
    except NonFiniteFieldError:
        # a transform that overflows on the window certifies nothing
        nan = (math.nan,) * len(levels)
        study = RefinementStudy(tuple(levels), nan, nan, nan, nan[1:])
    return InvarianceResult(cmap, geom.regime, study)


@dataclass(frozen=True)
class CompetingFormDiagnostic:
    regime: Regime
    composed: RefinementStudy
    competing: RefinementStudy
    ratio_spread: float  # std / |mean| of competing / composed over the window

    @property
    def competing_matches_up_to_constant(self) -> bool:
        return self.ratio_spread < 1e-8


def compare_competing_form(
    cmap: ConformalMap,
    geom: DendriteGeometry,
    params: CableParams,
    V: Callable,
    t_window: tuple,
    levels: Sequence[int] = (201, 401, 801),
    x_window: Optional[tuple] = None,
) -> CompetingFormDiagnostic:
    composed = transform(cmap, geom, params, V)
    competing = competing_transform(cmap, geom, params, V)
    xw = x_window or (geom.x_min, geom.x_max)
    xs = np.linspace(*xw, 57)[None, 1:-1]
    ts = np.linspace(*t_window, 23)[:, None]
    with np.errstate(all="ignore"):
        ratio = competing(xs, ts) / composed(xs, ts)
        spread = float(np.std(ratio) / abs(np.mean(ratio)))
    if not math.isfinite(spread):
        spread = math.inf
    return CompetingFormDiagnostic(
        geom.regime,
        residual_refinement(geom, params, composed, t_window, levels, x_window),
        residual_refinement(geom, params, competing, t_window, levels, x_window),
        spread,
    )


def write_invariance_csv(results: Sequence[InvarianceResult], dest: Union[str, io.TextIOBase], comments=()) -> None:
    """One row per map: parameters, regime, residual norm per level, orders, pass flag."""
    if not results:
        raise ValueError("no results to write")
    levels = results[0].study.levels
    header = ["index", "regime", "alpha", "beta", "gamma", "delta", "l", "v", "c"]
    header += [f"residual_n{n}" for n in levels]
    header += [f"order_{i}" for i in range(len(levels) - 1)] + ["pass"]

    def _write(fh):
        for line in comments:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i, r in enumerate(results):
            row = [i, r.regime.value] + [repr(float(v)) for v in r.cmap.params().values()]
            row += ["%.17g" % v for v in r.study.norms]
            row += ["%.6f" % o for o in r.study.orders]
            row.append("PASS" if r.passed else "FAIL")
            w.writerow(row)

    if isinstance(dest, str):
        with open(dest, "w", newline="") as fh:
            _write(fh)
    else:
        _write(dest)
