import numpy as np
import pytest

from robustacg import (GridCapError, SolverConfig, UncertaintySpec, build_upsilon,
                       make_power_game, power_scenario, run_distributed,
                       theorem2_distance_bound, worst_case_observation)
from robustacg.oracle import (GridSpec, brute_force_ne, brute_force_rne, central_derivative,
                              fd_partials, grid_worst_case, player_grid, saddle_check,
                              sphere_points)

from conftest import rate_log_game


def test_decoupled_ne_is_product_of_argmaxima():
    game = rate_log_game(np.zeros((2, 2, 2)), [[0.2, 0.45], [0.4, 0.15]])
    grid = GridSpec(points=11, tau=0.0)
    cells = brute_force_ne(game, grid)
    expected = []
    for n in range(2):
        pts = player_grid(game, n, 11)
        vals = np.log1p(pts / game.coupling.y[n]).sum(axis=1)
        expected.append(pts[np.argmax(vals)])
    assert len(cells) == 1
    assert cells.profiles[0] == pytest.approx(np.array(expected))


def test_low_interference_single_cell_contains_solver():
    game = make_power_game(power_scenario(2, 2, "unique", seed=0))
    cells = brute_force_ne(game, GridSpec(points=21))
    assert cells.n_cells == 1
    sol = run_distributed(game, UncertaintySpec.none(game), SolverConfig(tol=1e-9)).final
    assert cells.contains(sol)
    assert cells.cell_of(sol) == {0}


def test_high_interference_has_several_cells():
    found = [brute_force_ne(make_power_game(power_scenario(2, 2, "multi", seed=s)),
                            GridSpec(points=21)).n_cells for s in range(4)]
    assert max(found) >= 2


def test_zero_radius_rne_equals_ne():
    game = make_power_game(power_scenario(2, 2, "multi", seed=1))
    ne = brute_force_ne(game, GridSpec(points=11))
    rne = brute_force_rne(game, UncertaintySpec.none(game), GridSpec(points=11))
    assert np.array_equal(ne.profiles, rne.profiles)
    assert np.array_equal(ne.labels, rne.labels)


def test_small_radius_rne_within_bound_of_ne():
    game = make_power_game(power_scenario(2, 2, "unique", seed=2))
    spec = UncertaintySpec.uniform(game, 0.05)
    grid = GridSpec(points=21)
    ne = brute_force_ne(game, grid).representatives()[0]
    rne_cells = brute_force_rne(game, spec, grid)
    c_sm = build_upsilon(game).c_sm
    bound = theorem2_distance_bound(spec.radii, c_sm)
    slack = 2 * rne_cells.spacing * np.sqrt(game.n_players * game.n_dims)
    for rne in rne_cells.profiles:
        assert np.linalg.norm(rne - ne) <= bound + slack


def test_grid_cap_and_spec_validation():
    game = make_power_game(power_scenario(3, 3, "unique", seed=0))
    with pytest.raises(GridCapError):
        brute_force_ne(game, GridSpec(points=21))
    with pytest.raises(ValueError):
        GridSpec(points=2)
    with pytest.raises(ValueError):
        GridSpec(tau=-1.0)


@pytest.mark.parametrize("k", [1, 2, 3, 5])
def test_sphere_points_unit(k):
    pts = sphere_points(k, 500 if k > 3 else None)
    assert np.linalg.norm(pts, axis=1) == pytest.approx(np.ones(len(pts)))


def test_saddle_check_accepts_equilibrium_and_rejects_perturbation():
    game = make_power_game(power_scenario(2, 2, "unique", seed=3))
    spec = UncertaintySpec.uniform(game, 0.2, relative=True)
    a = run_distributed(game, spec, SolverConfig(tol=1e-10)).final
    for n in range(2):
        ft = worst_case_observation(game, a, n, spec).f_tilde
        assert saddle_check(game, spec, n, a[n], ft, a)
        f = game.observations(a)[n]
        assert not saddle_check(game, spec, n, a[n], f, a)          # nominal is not the worst case
        worse = np.array([1.0, 0.0]) if a[n, 0] < 0.5 else np.array([0.0, 1.0])
        assert not saddle_check(game, spec, n, worse, ft, a, tol=1e-4)
        assert not saddle_check(game, spec, n, a[n] + 1.0, ft, a)   # infeasible action


def test_grid_worst_case_zero_radius():
    game = rate_log_game(np.zeros((1, 1, 2)), [[1.0, 2.0]])
    ft, v = grid_worst_case(game, np.array([[0.5, 0.5]]), 0, 0.0)
    assert ft == pytest.approx([1.0, 2.0])
    assert v == pytest.approx(np.log(1.5) + np.log(1.25))


def test_central_derivative_orders():
    x = np.linspace(0.3, 2.0, 7)
    assert central_derivative(np.sin, x, 1) == pytest.approx(np.cos(x), rel=1e-9)
    assert central_derivative(np.exp, x, 2) == pytest.approx(np.exp(x), rel=1e-7)
    assert central_derivative(np.log, x, 3) == pytest.approx(2 / x ** 3, rel=1e-4)
    with pytest.raises(ValueError):
        central_derivative(np.sin, x, 4)


def test_fd_partials_match_rate_log_hand():
    game = rate_log_game(np.zeros((1, 1, 1)), np.ones((1, 1)))
    d = fd_partials(game, np.array([1.0]), np.array([1.0]), 0)
    assert d["da"] == pytest.approx([0.5], rel=1e-9)
    assert d["df"] == pytest.approx([-0.5], rel=1e-9)
    assert d["daa"] == pytest.approx([-0.25], rel=1e-7)
