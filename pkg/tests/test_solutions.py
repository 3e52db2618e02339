import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conformal_cable.geometry import CableParams, DendriteGeometry, RegimeError, diffusivity
from conformal_cable.pde import residual_refinement
from conformal_cable.solutions import (
    ConstantMode,
    CosineMode,
    HeatKernel,
    ModeSpec,
    alternate_bessel_form,
    cylindrical_kernel,
    cylindrical_mode,
    equivalence_nu0_nu45,
    general_solution,
    parabolic_solution,
    peel_off,
)

LEVELS = (101, 201, 401)


def test_cylindrical_mode_limits(params, cylinder):
    x = np.linspace(0, 2, 9)
    np.testing.assert_allclose(cylindrical_mode(params, cylinder, 0.0)(x, 0.7), math.exp(-0.7 / params.tau))
    np.testing.assert_allclose(cylindrical_mode(params, cylinder, 3.0)(x, 0.0), np.cos(3 * x))


def test_free_solutions_solve_heat_equation():
    D, z, t, dz, dt = 0.3, np.linspace(-1, 1, 7), 0.4, 1e-4, 1e-5
    for psi in (HeatKernel(D, 0.2, 0.1), CosineMode(D, 2.0, 0.3), ConstantMode()):
        lhs = (psi(z, t + dt) - psi(z, t - dt)) / (2 * dt)
        rhs = D * (psi(z + dz, t) - 2 * psi(z, t) + psi(z - dz, t)) / dz**2
        np.testing.assert_allclose(lhs, rhs, atol=1e-5)


def test_cylindrical_residual(params, cylinder):
    for sol in (cylindrical_mode(params, cylinder, 2.0), cylindrical_kernel(params, cylinder, 0.3, 1.0)):
        assert residual_refinement(cylinder, params, sol, (0.0, 0.5), LEVELS).min_order >= 1.8


def test_parabolic_residual(params, parabolic):
    D = diffusivity(parabolic, params)
    for psi in (ConstantMode(), HeatKernel(D, 0.3, 0.5), CosineMode(D, 1.2)):
        sol = parabolic_solution(params, parabolic, psi)
        assert residual_refinement(parabolic, params, sol, (0.0, 0.5), LEVELS).min_order >= 1.8


def test_parabolic_constant_profile(params, parabolic):
    g = parabolic
    x = np.linspace(0, 2, 11)
    rate = 9 * g.a**2 * g.d0 / (16 * params.r_L * params.c_M) + 1 / params.tau
    v = parabolic_solution(params, g, ConstantMode())(x, 0.3)
    np.testing.assert_allclose(v, (1 + g.a * x) ** -1.5 * math.exp(-rate * 0.3), rtol=1e-14)


@pytest.mark.parametrize("nu", [1.0, 0.5, 3.0, 0.8, 4.3, -0.7])
def test_bessel_mode_residual(params, nu):
    g = DendriteGeometry(1.0, 0.8, nu, 0.2, 2.0)
    sol = general_solution(params, g, ModeSpec(1.3))
    assert residual_refinement(g, params, sol, (0.0, 0.5), LEVELS).min_order >= 1.8


@pytest.mark.parametrize("nu", [1.0, 0.5, 3.0])
def test_neumann_branch_residual(params, nu):
    g = DendriteGeometry(1.0, 0.8, nu, 0.2, 2.0)
    sol = general_solution(params, g, ModeSpec(0.9, A=0.3, B=1.0))
    assert residual_refinement(g, params, sol, (0.0, 0.5), LEVELS).min_order >= 1.8


@pytest.mark.parametrize("nu, A, B", [(1.0, 1.0, 0.0), (1.0, 0.0, 1.0), (0.5, 1.0, 1.0), (3.0, 0.4, 1.0)])
def test_zero_energy_branch(params, nu, A, B):
    g = DendriteGeometry(1.0, 0.8, nu, 0.2, 2.0)
    sol = general_solution(params, g, ModeSpec(0.0, A, B))
    x = np.linspace(0.2, 2, 7)
    ratio = sol(x, 0.9) / sol(x, 0.0)
    np.testing.assert_allclose(ratio, math.exp(-0.9 / params.tau), rtol=1e-13)
    assert residual_refinement(g, params, sol, (0.0, 0.5), LEVELS).min_order >= 1.8


@pytest.mark.parametrize("nu", [1.0, 0.5, 3.0])
def test_alternate_closed_form_fails_residual(params, nu):
    g = DendriteGeometry(1.0, 0.8, nu, 0.2, 2.0)
    alt = alternate_bessel_form(params, g, ModeSpec(1.3))
    study = residual_refinement(g, params, alt, (0.0, 0.5), LEVELS)
    assert max(study.orders) < 0.5


def test_nu0_bessel_mode_is_cosine(params):
    k = 2.0
    a = 2 * k / math.pi  # z = x + 1/a puts the sine node where cos(kx) has its crest
    g0 = DendriteGeometry(1.0, a, 0.0, 0.0, 3.0)
    cyl = DendriteGeometry(1.0, 0.0, 0.0, 0.0, 3.0)
    D = diffusivity(g0, params)
    bessel = general_solution(params, g0, ModeSpec(D * k**2, A=math.sqrt(math.pi * k / 2)))
    cos_mode = cylindrical_mode(params, cyl, k)
    x = np.linspace(0.0, 3.0, 301)[:, None]
    t = np.array([0.0, 0.2, 0.9])[None, :]
    ref = cos_mode(x, t)
    keep = np.abs(ref) > 1e-3 * np.abs(ref).max()
    rel = np.abs(bessel(x, t) - ref)[keep] / np.abs(ref)[keep]
    assert rel.max() < 1e-8


@settings(max_examples=40, deadline=None)
@given(
    st.sampled_from([0.0, 0.5, 1.0, 3.0, 4.3]),
    # exact zero or a positive energy well clear of Bessel underflow at small argument
    st.one_of(st.just(0.0), st.floats(1e-3, 5.0)),
    st.floats(0.01, 1.0),
    st.floats(0.0, 1.0),
)
def test_separable_in_time(nu, E, dt, t):
    p = CableParams(1.0, 2.0, 0.7)
    g = DendriteGeometry(1.0, 0.8, nu, 0.2, 2.0)
    sol = general_solution(p, g, ModeSpec(E, 1.0, 0.0))
    x = np.linspace(0.25, 2.0, 9)
    a, b = sol(x, t), sol(x, t + dt)
    keep = np.abs(a) > 1e-8 * np.abs(a).max()
    ratio = b[keep] / a[keep]
    np.testing.assert_allclose(ratio, ratio[0], rtol=1e-10)
    np.testing.assert_allclose(ratio[0], math.exp(-(E + 1 / p.tau) * dt), rtol=1e-10)


def test_equivalence_report(params):
    rep = equivalence_nu0_nu45(params)
    assert rep.coupling_nu0 == 0.0 and rep.coupling_nu45 == 0.0
    assert rep.diffusivity_nu0 == rep.diffusivity_nu45
    assert rep.exponent_nu0 == 0.0
    assert rep.exponent_nu45 == pytest.approx(-1.0, rel=1e-14)
    assert rep.same_equation
    assert rep.max_ratio_error < 1e-12


def test_peel_off_factors(params, cylinder, parabolic, cone):
    assert peel_off(cylinder, params).kind == "leak"
    assert peel_off(parabolic, params).kind == "exponential"
    pw = peel_off(cone, params)
    assert pw.kind == "power" and pw.spatial == pytest.approx(-1.5)
    np.testing.assert_allclose(pw(np.array([2.0]), 0.0), 2.0**-1.5)


def test_regime_checks(params, cylinder, parabolic, cone):
    with pytest.raises(RegimeError):
        cylindrical_mode(params, cone, 1.0)
    with pytest.raises(RegimeError):
        parabolic_solution(params, cone, ConstantMode())
    with pytest.raises(RegimeError):
        parabolic_solution(params, DendriteGeometry(1.0, 0.0, 2.0, 0, 1), ConstantMode())
    with pytest.raises(ValueError):
        parabolic_solution(params, parabolic, HeatKernel(123.0))
    with pytest.raises(RegimeError):
        general_solution(params, cylinder, ModeSpec(1.0))
    with pytest.raises(ValueError):
        ModeSpec(-1.0)
    with pytest.raises(ValueError):
        ModeSpec(1.0, 0.0, 0.0)
