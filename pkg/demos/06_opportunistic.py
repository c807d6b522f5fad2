"""
Growing the uncertainty region on purpose
=========================================

When the curvature test suggests several equilibria, users add
uncertainty step by step and keep going while social utility rises. The
history lists (radius, social utility) pairs. The result is never worse
than the starting equilibrium.
"""
from robustacg import make_power_game, opportunistic_run, power_scenario
from robustacg.bench import STUDY_OPPORTUNISTIC

for regime in ("moderate", "high"):
    game = make_power_game(power_scenario(4, 8, regime, seed=0))
    trace = opportunistic_run(game, STUDY_OPPORTUNISTIC)
    meta = trace.meta
    print(f"{regime:>8}: triggered {meta['triggered']}, v* = {meta['v_star']:.4f}, "
          f"eta = {meta['eta']:.2e}")
    for eps, u in meta["history"]:
        print(f"          radius {eps:.2f}: social utility {u:.4f}")
