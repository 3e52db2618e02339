"""Random conformal maps carry solutions to solutions.

Each regime gets a handful of seeded maps; the transformed voltage is sampled
on a primed window and its residual is refined on 201/401/801 points.
"""
import numpy as np

from conformal_cable import CableParams, DendriteGeometry
from conformal_cable.geometry import diffusivity
from conformal_cable.solutions import CosineMode, ModeSpec, cylindrical_mode, general_solution, parabolic_solution
from conformal_cable.symmetry import check_invariance, random_map

params = CableParams(c_M=1.0, r_M=2.0, r_L=0.7)
window = (0.1, 0.6)
cases = []
g = DendriteGeometry(1.0, 0.0, 0.0, 0.0, 2.0)
cases.append((g, cylindrical_mode(params, g, 1.0)))
g = DendriteGeometry(1.0, 1.0, 2.0, 0.0, 2.0)
cases.append((g, parabolic_solution(params, g, CosineMode(diffusivity(g, params), 1.2))))
g = DendriteGeometry(1.0, 0.8, 1.0, 0.2, 2.0)
cases.append((g, general_solution(params, g, ModeSpec(1.3))))

rng = np.random.default_rng(7)
for geom, V in cases:
    # translations and boosts are not symmetries once g != 0
    restricted = geom.regime.value == "general"
    for _ in range(4):
        cmap = random_map(rng, window, restricted=restricted)
        res = check_invariance(cmap, geom, params, V, window)
        print(
            f"{geom.regime.value:12s} alpha={cmap.alpha:+.2f} gamma={cmap.gamma:+.2f} v={cmap.v:+.2f} "
            f"orders {np.round(res.study.orders, 2)}  {'PASS' if res.passed else 'FAIL'}"
        )
