"""
The adversary's choice: worst-case observations
===============================================

Each user's utility is evaluated at the point of its uncertainty ball that
hurts it most. The solver finds that point from the stationarity
condition; here it is compared with a dense sweep over the sphere.
"""
import numpy as np

from robustacg import (UncertaintySpec, make_power_game, power_scenario, psi, random_profile,
                       utility, worst_case_observation)
from robustacg.oracle import grid_worst_case

rng = np.random.default_rng(0)
game = make_power_game(power_scenario(2, 2, "multi", seed=3))
a = random_profile(game, rng)
f = game.observations(a)[0]

for eps in (0.1, 0.3, 0.6):
    spec = UncertaintySpec.uniform(game, eps, relative=True)
    res = worst_case_observation(game, a, 0, spec)
    _, sampled = grid_worst_case(game, a, 0, res.radius, refine=False)
    print(f"eps={eps}: nominal {utility(game, a, 0):.5f}, robust {psi(game, a, 0, spec):.5f}, "
          f"3600-angle sweep {sampled:.5f}")
    print(f"   direction {np.round(res.direction, 4)}, moved {np.linalg.norm(res.f_tilde - f):.4f} "
          f"of radius {res.radius:.4f}")
