"""Finite-difference generators of the cable symmetries and their commutators.

Generators are sparse complex matrices on a uniform grid.  Momentum is
``P = -i D1`` with ``D1`` the central difference truncated at the ends (so
``D1`` is exactly antisymmetric); multiplication operators are diagonal.
Products such as ``X P + P X`` are formed from the matrices as written.

A relation ``[A, B] = sum_k c_k R_k`` is checked on a fixed suite of smooth,
compactly concentrated test vectors, keeping only rows away from the ends:

    deviation = ||([A, B] - R) V|| / ||R V||

(``||A B V|| + ||B A V||`` in the denominator when ``R = 0``).  The deviation
should shrink like ``h**2``.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import expm_multiply

from .geometry import (
    CableParams,
    DendriteGeometry,
    Regime,
    RegimeError,
    coupling_g,
    diffusivity,
    effective_mass,
    z_general,
    z_parabolic,
)
from .pde import Grid1D, convergence_orders

__all__ = [
    "GeneratorSet",
    "Relation",
    "momentum",
    "build_cylindrical_generators",
    "build_parabolic_generators",
    "build_general_generators",
    "build_generators",
    "schrodinger_relations",
    "conformal_relations",
    "relations_for",
    "corrupted_relation",
    "test_vectors",
    "RelationResult",
    "AlgebraReport",
    "check_algebra",
    "certify",
    "write_algebra_csv",
    "ConservationResult",
    "conservation_defect",
]

MIN_ORDER = 1.5
ROUNDOFF = 1e-10  # deviations below this count as exact (e.g. [P, P^2] = 0)
MARGIN = 10  # rows dropped at each end


@dataclass(frozen=True)
class GeneratorSet:
    """Named sparse matrices instantiated at time ``t`` on ``grid``."""

    regime: Regime
    grid: Grid1D
    t: complex
    ops: Dict[str, sp.csr_matrix] = field(repr=False)
    mass: float = 1.0

    def __getitem__(self, name):
        if name == "1":
            return sp.identity(self.grid.n, dtype=complex, format="csr")
        return self.ops[name]

    @property
    def names(self):
        return tuple(self.ops)


def momentum(grid: Grid1D) -> sp.csr_matrix:
    """``-i`` times the central first difference, truncated at the ends."""
    n, h = grid.n, grid.h
    off = np.full(n - 1, 1.0 / (2 * h))
    return (-1j * sp.diags([-off, off], [-1, 1], format="csr")).astype(complex)


def _diag(values) -> sp.csr_matrix:
    return sp.diags(np.asarray(values, dtype=complex), 0, format="csr")


def _schrodinger_set(regime, grid, t, P, X, H0, mass, leak=0.0, k1_coeff=0.25, k2_outside=True, k2_coeff=None):
    """``G, K1, K2`` from a momentum-like ``P``, position-like ``X`` and ``H0``."""
    n = grid.n
    I = sp.identity(n, dtype=complex, format="csr")
    H = H0 + leak * I
    S = X @ P + P @ X
    X2 = X @ X
    k2_coeff = mass / 2 if k2_coeff is None else k2_coeff
    G = t * P - mass * X
    K1 = t * H - k1_coeff * S
    if k2_outside:
        K2 = t**2 * H - (t / 2) * S + k2_coeff * X2
    else:
        K2 = t**2 * H - (t / 2) * (S + k2_coeff * X2)
    ops = {"P": P, "H0": H0, "G": G, "K1": K1, "K2": K2, "X": X}
    if leak:
        ops["H"] = H
    return GeneratorSet(regime, grid, t, {k: v.tocsr() for k, v in ops.items()}, mass)


def build_cylindrical_generators(
    geom: DendriteGeometry,
    params: CableParams,
    grid: Grid1D,
    t: complex = 0.0,
    with_leak: bool = False,
    origin: float = 0.0,
) -> GeneratorSet:
    """``P, H0, G, K1, K2`` for a constant diameter.

    ``H0 = D P^2``, ``G = t P - m X``, ``K1 = t H0 - (X P + P X)/4`` and
    ``K2 = t^2 H0 - t (X P + P X)/2 + (m/2) X^2`` with ``X = diag(x - origin)``.
    ``with_leak=True`` puts ``H = H0 + 1/tau`` in the K slots (and adds ``H``).
    """
    if geom.regime is not Regime.CYLINDRICAL:
        raise RegimeError(f"needs a constant diameter, got {geom.regime.value}")
    P = momentum(grid)
    H0 = diffusivity(geom, params) * (P @ P)
    leak = 1.0 / params.tau if with_leak else 0.0
    return _schrodinger_set(
        Regime.CYLINDRICAL, grid, t, P, _diag(grid.x - origin), H0, effective_mass(geom, params), leak
    )


def build_parabolic_generators(
    geom: DendriteGeometry,
    params: CableParams,
    grid: Grid1D,
    t: complex = 0.0,
    k2_placement: str = "outside",
    competing_coefficients: bool = False,
) -> GeneratorSet:
    """``Pi, H0, G, K1, K2`` for ``nu = 2`` (stored with ``Pi`` under key ``"P"``).

    ``Pi = ((1 + a x)/a) P - 3i/2`` and ``X = diag(ln(1 + a x))``; the rest
    follows the constant-diameter set with mass ``2 r_L c_M / (d0 a^2)``.

    ``k2_placement="inside"`` moves the quadratic term of ``K2`` into the
    ``t``-bracket.  ``competing_coefficients=True`` uses the competing
    coefficients ``1/2`` in ``K1``, ``2 r_L c_M / a^2`` in ``G`` and
    ``r_L c_M / a^2`` on the quadratic term.
    """
    if geom.regime is not Regime.PARABOLIC:
        raise RegimeError(f"needs nu = 2, got {geom.regime.value}")
    if k2_placement not in ("outside", "inside"):
        raise ValueError("k2_placement is 'outside' or 'inside'")
    x = grid.x
    Pi = _diag((1 + geom.a * x) / geom.a) @ momentum(grid) - 1.5j * sp.identity(grid.n, format="csr")
    H0 = diffusivity(geom, params) * (Pi @ Pi)
    X = _diag(z_parabolic(geom, x))
    mass = effective_mass(geom, params)
    if competing_coefficients:
        rc = params.r_L * params.c_M / geom.a**2
        out = _schrodinger_set(
            Regime.PARABOLIC, grid, t, Pi, X, H0, 2 * rc, k1_coeff=0.5, k2_outside=k2_placement == "outside", k2_coeff=rc
        )
        return GeneratorSet(out.regime, grid, t, out.ops, mass)
    return _schrodinger_set(Regime.PARABOLIC, grid, t, Pi, X, H0, mass, k2_outside=k2_placement == "outside")


def build_general_generators(
    geom: DendriteGeometry,
    params: CableParams,
    grid: Grid1D,
    t: complex = 0.0,
    potential_has_nu: bool = True,
) -> GeneratorSet:
    """``Pi, H0, K1, K2`` of the conformal algebra (``Pi`` under key ``"P"``).

    ``Pi = -i u^(nu/2) D1 - i (3 nu a / 4) u^(nu/2 - 1)``, ``u = 1 + a x``,
    ``H0 = D Pi^2 + 3 nu a^2 d0 (5 nu - 4) u^(nu - 2) / (64 r_L c_M)`` (which is
    ``g / z^2``), ``K1 = t H0 - (Z Pi - i/2)/2`` and
    ``K2 = t^2 H0 - t (Z Pi - i/2) + (m0/2) Z^2`` with ``Z = diag(z(x))``.

    ``potential_has_nu=False`` drops the factor ``nu`` from the potential, for
    comparison with the competing form of ``H0``.
    """
    if not geom.has_z_map:
        raise RegimeError("needs a != 0 and nu != 2")
    nu, a = geom.nu, geom.a
    u = 1 + a * grid.x
    n = grid.n
    I = sp.identity(n, dtype=complex, format="csr")
    Pi = _diag(u ** (nu / 2)) @ momentum(grid) - 1j * (3 * nu * a / 4) * _diag(u ** (nu / 2 - 1))
    strength = 3 * a**2 * geom.d0 * (5 * nu - 4) / (64 * params.r_L * params.c_M)
    if potential_has_nu:
        strength *= nu
    H0 = diffusivity(geom, params) * (Pi @ Pi) + strength * _diag(u ** (nu - 2))
    Z = _diag(z_general(geom, grid.x))
    m0 = effective_mass(geom, params)
    dil = Z @ Pi - 0.5j * I
    K1 = t * H0 - 0.5 * dil
    K2 = t**2 * H0 - t * dil + (m0 / 2) * (Z @ Z)
    ops = {"P": Pi, "H0": H0, "K1": K1, "K2": K2, "X": Z}
    return GeneratorSet(Regime.GENERAL, grid, t, {k: v.tocsr() for k, v in ops.items()}, m0)


def build_generators(geom, params, grid, t=0.0) -> GeneratorSet:
    regime = geom.regime
    if regime is Regime.CYLINDRICAL:
        return build_cylindrical_generators(geom, params, grid, t)
    if regime is Regime.PARABOLIC:
        return build_parabolic_generators(geom, params, grid, t)
    return build_general_generators(geom, params, grid, t)


# -- relations -----------------------------------------------------------------


@dataclass(frozen=True)
class Relation:
    """``[left, right] = sum(coef * name)``; the name ``"1"`` is the identity."""

    label: str
    left: str
    right: str
    rhs: Tuple[Tuple[complex, str], ...] = ()


def schrodinger_relations(mass: float, momentum_name: str = "P") -> List[Relation]:
    """The ten relations of the Schrodinger algebra."""
    p = momentum_name
    table = [
        (p, "H0", ()),
        (p, "K1", ((0.5j, "P"),)),
        (p, "K2", ((1j, "G"),)),
        (p, "G", ((1j * mass, "1"),)),
        ("H0", "K1", ((1j, "H0"),)),
        ("H0", "G", ((1j, "P"),)),
        ("H0", "K2", ((2j, "K1"),)),
        ("K1", "K2", ((1j, "K2"),)),
        ("K1", "G", ((0.5j, "G"),)),
        ("K2", "G", ()),
    ]
    return [Relation(f"[{l},{r}]", l.replace(p, "P"), r, rhs) for l, r, rhs in table]


def conformal_relations() -> List[Relation]:
    return [
        Relation("[H0,K1]", "H0", "K1", ((1j, "H0"),)),
        Relation("[H0,K2]", "H0", "K2", ((2j, "K1"),)),
        Relation("[K1,K2]", "K1", "K2", ((1j, "K2"),)),
    ]


def relations_for(gens: GeneratorSet) -> List[Relation]:
    if gens.regime is Regime.GENERAL:
        return conformal_relations()
    return schrodinger_relations(gens.mass, "Pi" if gens.regime is Regime.PARABOLIC else "P")


def corrupted_relation(gens: GeneratorSet) -> Relation:
    """A relation with a doubled right-hand side, for negative controls.

    ``[P, G] = 2 i m`` for the Schrodinger sets, ``[H0, K1] = 2 i H0`` for the
    conformal set.
    """
    if gens.regime is Regime.GENERAL:
        return Relation("[H0,K1]=2iH0 (corrupted)", "H0", "K1", ((2j, "H0"),))
    return Relation("[P,G]=2im (corrupted)", "P", "G", ((2j * gens.mass, "1"),))


# -- checking ------------------------------------------------------------------


def test_vectors(grid: Grid1D, width_fraction: float = 1 / 24, offsets=(0.0, -0.15, 0.15), degrees=(0, 1, 2)):
    """Columns ``q**k exp(-q**2/2)``, ``q = (x - c)/sigma``, centred in the domain."""
    L = grid.x_max - grid.x_min
    sigma = width_fraction * L
    mid = 0.5 * (grid.x_min + grid.x_max)
    cols = []
    for off in offsets:
        q = (grid.x - (mid + off * L)) / sigma
        for k in degrees:
            cols.append(q**k * np.exp(-0.5 * q**2))
    return np.column_stack(cols).astype(complex)


def _apply_rhs(gens: GeneratorSet, rel: Relation, V):
    out = np.zeros_like(V)
    for coef, name in rel.rhs:
        out = out + coef * (gens[name] @ V)
    return out


def relation_deviation(gens: GeneratorSet, rel: Relation, V=None, margin: int = MARGIN) -> float:
    V = test_vectors(gens.grid) if V is None else V
    A, B = gens[rel.left], gens[rel.right]
    ab = A @ (B @ V)
    ba = B @ (A @ V)
    rhs = _apply_rhs(gens, rel, V)
    rows = slice(margin, gens.grid.n - margin)
    num = np.linalg.norm((ab - ba - rhs)[rows])
    den = np.linalg.norm(rhs[rows]) if rel.rhs else np.linalg.norm(ab[rows]) + np.linalg.norm(ba[rows])
    return float(num / den)


@dataclass(frozen=True)
class RelationResult:
    relation: Relation
    levels: Tuple[int, ...]
    h: Tuple[float, ...]
    deviations: Tuple[float, ...]
    orders: Tuple[float, ...]
    min_order: float = MIN_ORDER

    @property
    def exact(self) -> bool:
        return max(self.deviations) <= ROUNDOFF

    @property
    def passed(self) -> bool:
        if self.exact:
            return True
        o = np.asarray(self.orders)
        return bool(np.all(np.isfinite(o)) and o.min() >= self.min_order)


@dataclass(frozen=True)
class AlgebraReport:
    results: Tuple[RelationResult, ...]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def failures(self):
        return [r for r in self.results if not r.passed]


def check_algebra(
    build: Callable[[Grid1D], GeneratorSet],
    relations: Sequence[Relation],
    grids: Sequence[Grid1D],
) -> AlgebraReport:
    """Deviation of each relation on every grid of a refinement ladder."""
    if len(grids) < 2:
        raise ValueError("need at least two grid levels")
    devs = {r.label: [] for r in relations}
    for grid in grids:
        gens = build(grid)
        V = test_vectors(grid)
        for rel in relations:
            devs[rel.label].append(relation_deviation(gens, rel, V))
    levels = tuple(g.n for g in grids)
    hs = tuple(g.h for g in grids)
    out = []
    for rel in relations:
        d = np.asarray(devs[rel.label])
        with np.errstate(divide="ignore", invalid="ignore"):
            orders = tuple(float(o) for o in convergence_orders(d))
        out.append(RelationResult(rel, levels, hs, tuple(float(v) for v in d), orders))
    return AlgebraReport(tuple(out))


def certify(
    geom: DendriteGeometry,
    params: CableParams,
    t: float = 0.0,
    levels: Sequence[int] = (201, 401, 801),
    include_corrupted: bool = False,
) -> AlgebraReport:
    """Check every relation of the geometry's algebra over a grid ladder."""
    grids = [Grid1D.on(geom, n) for n in levels]
    probe = build_generators(geom, params, grids[0], t)
    rels = relations_for(probe)
    if include_corrupted:
        rels = rels + [corrupted_relation(probe)]
    return check_algebra(lambda g: build_generators(geom, params, g, t), rels, grids)


def write_algebra_csv(report: AlgebraReport, dest: Union[str, io.TextIOBase], comments: Iterable[str] = ()) -> None:
    """Rows ``relation,n,h,deviation,order`` (order relative to the previous level)."""

    def _write(fh):
        for line in comments:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["relation", "n", "h", "deviation", "order", "pass"])
        for r in report.results:
            for i, (n, h, d) in enumerate(zip(r.levels, r.h, r.deviations)):
                order = "" if i == 0 else "%.6f" % r.orders[i - 1]
                w.writerow([r.relation.label, n, "%.17g" % h, "%.17g" % d, order, "PASS" if r.passed else "FAIL"])

    if isinstance(dest, str):
        with open(dest, "w", newline="") as fh:
            _write(fh)
    else:
        _write(dest)


# -- conservation under the diffusion semigroup ------------------------------


@dataclass(frozen=True)
class ConservationResult:
    generator: str
    dts: Tuple[float, ...]
    defects: Tuple[float, ...]  # ||(O(t+dt) S - S O(t)) V|| / ||O(t) V||

    @property
    def orders(self) -> np.ndarray:
        return convergence_orders(self.defects)

    @property
    def rates(self) -> np.ndarray:
        """Defect per unit time; stays O(1) when O is not conserved."""
        return np.asarray(self.defects) / np.asarray(self.dts)


def conservation_defect(
    geom: DendriteGeometry,
    params: CableParams,
    n: int = 401,
    t: float = 0.3,
    dts: Sequence[float] = (4e-3, 2e-3, 1e-3),
    generators: Sequence[str] = ("G", "K1", "K2"),
    imaginary_time: bool = True,
) -> List[ConservationResult]:
    """Commutation of time-dependent generators with ``S(dt) = exp(-dt H0)``.

    A generator ``O(t)`` maps solutions of ``psi_t = -H0 psi`` to solutions when
    ``dO/dt = [O, H0]``.  The explicit time in the generators has to enter as
    ``-i t`` for this to hold with a real diffusion semigroup;
    ``imaginary_time=False`` uses the real-time operators for comparison.
    """
    grid = Grid1D.on(geom, n)
    V = test_vectors(grid)
    rows = slice(MARGIN, n - MARGIN)
    scale = -1j if imaginary_time else 1.0
    H0 = build_generators(geom, params, grid, 0.0)["H0"]
    out = []
    for name in generators:
        defects = []
        for dt in dts:
            before = build_generators(geom, params, grid, scale * t)[name]
            after = build_generators(geom, params, grid, scale * (t + dt))[name]
            lhs = after @ expm_multiply(-dt * H0, V)
            rhs = expm_multiply(-dt * H0, before @ V)
            defects.append(float(np.linalg.norm((lhs - rhs)[rows]) / np.linalg.norm((before @ V)[rows])))
        out.append(ConservationResult(name, tuple(dts), tuple(defects)))
    return out
