import math

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from robustacg import (ConvergenceError, OpportunisticConfig, SolverConfig, UncertaintySpec,
                       best_response, best_response_sweep, gradient_play, jackson_scenario,
                       jacobi_update, make_jackson_game, make_power_game, opportunistic_run,
                       power_scenario, proximal_map, proximal_step, run_distributed,
                       social_utility)
from robustacg.oracle import GridSpec, brute_force_rne
from robustacg.solvers import (convergence_preconditions, multiple_equilibria_suspected,
                               projected_gradient_ascent, third_partials_vanish)

from conftest import rate_log_game


def _decoupled(k=1, total=1.0):
    return rate_log_game(np.zeros((2, 2, k)), np.ones((2, k)), total=total)


def test_pga_quadratic_on_simplex():
    target = np.array([[0.9, 0.5, -0.2]])
    grad = lambda x: target - x
    x, res, _ = projected_gradient_ascent(grad, np.zeros((1, 3)), np.zeros((1, 3)),
                                          np.ones((1, 3)), np.array([1.0]), np.array([False]))
    assert x == pytest.approx(np.array([[0.7, 0.3, 0.0]]), abs=1e-7)
    assert res.max() <= 1e-8


def test_pga_cap_raises():
    grad = lambda x: 1.0 / (x + 1e-3) - x
    with pytest.raises(ConvergenceError):
        projected_gradient_ascent(grad, np.array([[0.6, 0.1, 0.1, 0.1, 0.1]]), np.zeros((1, 5)),
                                  np.ones((1, 5)), np.array([1.0]), np.array([False]),
                                  tol=1e-15, max_iter=2)


def test_proximal_step_one_dim_golden_section():
    game = _decoupled()
    spec = UncertaintySpec.none(game)
    out = proximal_step(game, spec, np.zeros((2, 1)), 0)
    ref = minimize_scalar(lambda a: -(math.log1p(a) - 0.5 * a * a), bounds=(0, 1),
                          method="bounded", options={"xatol": 1e-10})
    assert 0 < out[0] <= 1
    assert out[0] == pytest.approx(ref.x, abs=1e-6)
    assert math.log1p(out[0]) - 0.5 * out[0] ** 2 > 0.0


def test_proximal_step_fixed_point_is_stationary():
    game = make_power_game(power_scenario(3, 4, "unique", seed=0))
    spec = UncertaintySpec.uniform(game, 0.2, relative=True)
    fixed = run_distributed(game, spec, SolverConfig(tol=1e-10)).final
    for n in range(3):
        assert proximal_step(game, spec, fixed, n) == pytest.approx(fixed[n], abs=1e-7)
    with pytest.raises(IndexError):
        proximal_step(game, spec, fixed, 5)


def test_decoupled_run_converges_fast():
    game = _decoupled()
    tr = run_distributed(game, UncertaintySpec.none(game), a0=np.zeros((2, 1)))
    assert tr.converged and tr.iterations <= 3
    assert tr.final == pytest.approx(np.ones((2, 1)))


def test_jackson_run_matches_oracle():
    game = make_jackson_game(jackson_scenario(2, 2, routing_total=0.4, seed=3))
    spec = UncertaintySpec.uniform(game, 0.1, relative=True)
    tr = run_distributed(game, spec)
    assert tr.converged
    assert third_partials_vanish(game)
    cells = brute_force_rne(game, spec, GridSpec(points=21))
    assert cells.contains(tr.final)


def test_iwfa_decoupled_and_agreement():
    game = _decoupled(k=3, total=1.0)
    spec = UncertaintySpec.none(game)
    tr = best_response_sweep(game, spec)
    assert tr.profiles[1] == pytest.approx(np.full((2, 3), 1 / 3))
    game = make_power_game(power_scenario(3, 4, "unique", seed=7))
    spec = UncertaintySpec.none(game)
    iw = best_response_sweep(game, spec, SolverConfig(tol=1e-9)).final
    px = run_distributed(game, spec, SolverConfig(tol=1e-9)).final
    assert iw == pytest.approx(px, abs=1e-4)


def test_iwfa_high_interference_reports_honestly():
    game = make_power_game(power_scenario(3, 4, "high", seed=1))
    tr = best_response_sweep(game, UncertaintySpec.none(game), SolverConfig(max_iter=50))
    assert isinstance(tr.converged, bool)
    assert len(tr.steps) == tr.iterations


def test_best_response_beats_random_actions(rng):
    from robustacg import random_profile, utility
    game = make_power_game(power_scenario(3, 3, "multi", seed=2))
    a = random_profile(game, rng)
    br = best_response(game, UncertaintySpec.none(game), a)
    for n in range(3):
        best = utility(game, np.vstack([a[:n], br[n], a[n + 1:]]), n)
        for _ in range(30):
            trial = a.copy()
            trial[n] = random_profile(game, rng)[n]
            assert utility(game, trial, n) <= best + 1e-9


def test_gradient_play_zero_step_is_constant():
    game = make_power_game(power_scenario(2, 2, "unique", seed=0))
    a0 = np.full((2, 2), 0.3)
    tr = gradient_play(game, SolverConfig(step=0.0, max_iter=5), a0)
    assert np.all(tr.profiles == tr.profiles[0])


def test_gradient_play_decoupled_reaches_optimum():
    game = _decoupled(k=2)
    tr = gradient_play(game, SolverConfig(step=0.2, tol=1e-10), np.zeros((2, 2)))
    assert tr.converged
    assert tr.final == pytest.approx(np.full((2, 2), 0.5), abs=1e-8)


def test_jacobi_converges_on_unique_instance():
    game = make_power_game(power_scenario(3, 4, "unique", seed=4))
    spec = UncertaintySpec.none(game)
    jc = jacobi_update(game, SolverConfig(tol=1e-9), spec=spec).final
    px = run_distributed(game, spec, SolverConfig(tol=1e-9)).final
    assert jc == pytest.approx(px, abs=1e-6)


def test_preconditions_report():
    rep = convergence_preconditions(make_power_game(power_scenario(2, 2, "unique", seed=0)))
    assert rep["p_matrix"] and not rep["third_partials_zero"] and not rep["satisfied"]


def test_solver_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(max_iter=0)
    with pytest.raises(ValueError):
        SolverConfig(tol=0.0)
    with pytest.raises(ValueError):
        SolverConfig(scheme="random")
    with pytest.raises(ValueError):
        OpportunisticConfig(chi=1.5)


def test_opportunistic_skips_when_unique():
    game = make_power_game(power_scenario(3, 4, "unique", seed=0))
    assert not multiple_equilibria_suspected(game)
    tr = opportunistic_run(game)
    assert not tr.meta["triggered"]
    assert tr.meta["eta"] == 0.0
    assert np.array_equal(tr.final, tr.profiles[0])


def test_opportunistic_stops_after_a_losing_expansion():
    game = make_power_game(power_scenario(3, 2, "high", seed=0))
    cfg = OpportunisticConfig(stage1="iwfa", solver=SolverConfig(scheme="sequential"))
    tr = opportunistic_run(game, cfg)
    hist = tr.meta["history"]
    assert tr.meta["triggered"]
    assert len(hist) == 2 and hist[1][1] < hist[0][1]
    assert np.array_equal(tr.final, tr.profiles[0])


@pytest.mark.parametrize("seed", range(5))
def test_opportunistic_never_worse(seed):
    game = make_power_game(power_scenario(2, 2, "high", seed=seed))
    cfg = OpportunisticConfig(stage1="iwfa", solver=SolverConfig(scheme="sequential"))
    tr = opportunistic_run(game, cfg)
    assert social_utility(game, tr.final) >= tr.meta["v_star"] - 1e-12
    assert tr.meta["eta"] >= 0.0
