"""
Counting equilibria by brute force
==================================

With two users and two channels the joint action grid is small enough to
search exhaustively. Grid profiles where nobody can improve by more than
the local tolerance are grouped into cells. Strong interference yields
several cells; weak interference yields one.
"""
from robustacg import (UncertaintySpec, make_power_game, power_scenario, run_distributed)
from robustacg.oracle import GridSpec, brute_force_ne

grid = GridSpec(points=21)
for regime in ("unique", "multi"):
    for seed in range(3):
        game = make_power_game(power_scenario(2, 2, regime, seed=seed))
        cells = brute_force_ne(game, grid)
        sol = run_distributed(game, UncertaintySpec.none(game)).final
        print(f"{regime:>7} seed {seed}: {cells.n_cells} cell(s), solver output in cell "
              f"{sorted(cells.cell_of(sol))}")
        for rep in cells.representatives():
            print("          representative", rep.round(2).tolist())
