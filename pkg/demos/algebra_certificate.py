"""Commutation relations of the discretised generators.

Prints the deviation ladder for every relation in each regime, then shows what
goes wrong when the leak term is kept inside the dilation generators.
"""
from conformal_cable import CableParams, DendriteGeometry
from conformal_cable.algebra import build_cylindrical_generators, certify, check_algebra, schrodinger_relations
from conformal_cable.geometry import effective_mass
from conformal_cable.pde import Grid1D

params = CableParams(c_M=1.0, r_M=2.0, r_L=0.7)
for geom in (
    DendriteGeometry(1.0, 0.0, 0.0, 0.0, 2.0),
    DendriteGeometry(1.0, 1.0, 2.0, 0.0, 2.0),
    DendriteGeometry(1.0, 0.8, 1.0, 0.2, 2.0),
):
    print(f"\n{geom.regime.value}")
    for r in certify(geom, params, t=0.7, include_corrupted=True).results:
        devs = " ".join(f"{d:.2e}" for d in r.deviations)
        print(f"  {r.relation.label:28s} {devs}  {'PASS' if r.passed else 'FAIL'}")

geom = DendriteGeometry(1.0, 0.0, 0.0, 0.0, 2.0)
grids = [Grid1D.on(geom, n) for n in (201, 401, 801)]
rep = check_algebra(
    lambda g: build_cylindrical_generators(geom, params, g, 0.7, with_leak=True),
    schrodinger_relations(effective_mass(geom, params)),
    grids,
)
print("\nwith the leak inside K1, K2:", [r.relation.label for r in rep.failures()], "fail")
