"""
Is the equilibrium unique, and how far can uncertainty move it?
================================================================

A three-user power-control game on eight sub-channels. The curvature
matrix has the users' smallest own curvatures on the diagonal and their
largest cross effects off it. If it is a P-matrix the game has one
equilibrium, and its strong-monotonicity constant bounds how far a robust
equilibrium can drift.
"""
import numpy as np

from robustacg import (UncertaintySpec, analyze, make_power_game, power_scenario,
                       run_distributed)

for regime in ("unique", "multi"):
    game = make_power_game(power_scenario(3, 8, regime, seed=0))
    report = analyze(game)
    print(f"{regime:>7}: P-matrix {report.p_matrix}, c_sm = {report.c_sm:.4f}")
    print(np.round(report.upsilon, 4))

# Drift bound at 30% relative uncertainty, measured at the nominal equilibrium.
game = make_power_game(power_scenario(3, 8, "unique", seed=0))
nominal = run_distributed(game, UncertaintySpec.none(game)).final
spec = UncertaintySpec.uniform(game, 0.3, relative=True)
delta = spec.absolute(game, game.observations(nominal))
report = analyze(game, delta=delta, a=nominal)
robust = run_distributed(game, spec, a0=nominal).final
print(f"actual drift {np.linalg.norm(robust - nominal):.2e} "
      f"<= bound {report.distance_bound:.3f}")
print(f"estimated social-utility gap {report.gap_estimate:.3f}")
