import json

import numpy as np
import pytest

from robustacg import (InstabilityError, JacksonScenario, build_upsilon, generate_scenarios,
                       jackson_scenario, load_scenario, make_game, make_jackson_game,
                       make_log_theta_game, make_power_game, power_scenario, save_scenario,
                       total_delay, utilities)
from robustacg.models import power_uniqueness_condition, scenario_from_dict


def test_single_user_power_game_is_uncoupled():
    game = make_power_game(power_scenario(1, 4, "unique", seed=0))
    assert game.coupling.off_diagonal.shape == (1, 1, 4)
    assert np.all(game.coupling.off_diagonal == 0)
    assert build_upsilon(game).p_matrix


def test_unique_regime_p_matrix_count():
    # golden count for seeds 0..99 (N=3, K=8); the floor asked for is 95
    count = sum(build_upsilon(make_power_game(power_scenario(3, 8, "unique", seed=s))).p_matrix
                for s in range(100))
    assert count == 100


@pytest.mark.parametrize("seed", range(10))
def test_strong_cross_gains_break_p_matrix(seed):
    scen = power_scenario(3, 4, "multi", seed=seed)
    assert scen.h_bar[~np.eye(3, dtype=bool)].min() > 0.5
    assert not build_upsilon(make_power_game(scen)).p_matrix
    assert not power_uniqueness_condition(scen)


def test_regime_bands_hold():
    for regime, (lo, hi) in (("unique", (0, 0.01)), ("multi", (0.5, 5)), ("high", (5, 50))):
        for scen in generate_scenarios("power", {"n": 3, "k": 6, "regime": regime, "count": 10}, 1):
            off = scen.h_bar[~np.eye(3, dtype=bool)]
            assert np.all((off > lo) & (off < hi))


def test_generation_is_deterministic():
    a = generate_scenarios("power", {"n": 3, "k": 4, "count": 3}, 11)
    b = generate_scenarios("power", {"n": 3, "k": 4, "count": 3}, 11)
    for s, t in zip(a, b):
        assert s.to_dict() == t.to_dict()
    c = generate_scenarios("power", {"n": 3, "k": 4, "count": 3}, 12)
    assert a[0].to_dict() != c[0].to_dict()
    with pytest.raises(ValueError):
        generate_scenarios("optical", {}, 0)
    with pytest.raises(ValueError):
        power_scenario(2, 2, "nonsense")


def test_log_theta_recast_matches_rate_game(rng):
    scen = power_scenario(3, 4, "multi", seed=3)
    rate, logt = make_power_game(scen), make_log_theta_game(scen)
    from robustacg import random_profile
    for _ in range(10):
        a = random_profile(rate, rng)
        assert utilities(rate, a) == pytest.approx(utilities(logt, a), rel=1e-12)


def test_no_routing_gives_identity():
    scen = JacksonScenario(np.zeros((2, 3, 3)), np.full((3, 2), 3.0), np.full(3, 0.2))
    assert scen.theta(0) == pytest.approx(np.eye(3))
    assert np.all(scen.exit_probability == 1.0)


def test_two_node_routing_inverse():
    scen = JacksonScenario(np.array([[[0.0, 0.5], [0.0, 0.0]]]), np.full((2, 1), 3.0),
                           np.full(2, 0.2))
    assert scen.theta(0) == pytest.approx(np.array([[1.0, 0.5], [0.0, 1.0]]))


def test_delay_term_and_instability():
    scen = JacksonScenario(np.zeros((1, 1, 1)), np.array([[2.0]]), np.array([1.0]))
    assert total_delay(scen, [[1.0]]) == pytest.approx(1.0)
    with pytest.raises(InstabilityError) as info:
        total_delay(scen, [[2.0]])
    assert info.value.node == 0


def test_jackson_deficit_renormalisation():
    scen = jackson_scenario(5, 3, routing_total=0.5, seed=4)
    assert 1 - scen.exit_probability == pytest.approx(np.full((3, 5), 0.5), abs=1e-12)
    with pytest.raises(ValueError):
        jackson_scenario(routing_total=1.0)


def test_jackson_validation():
    with pytest.raises(ValueError):
        JacksonScenario(np.full((1, 2, 2), -0.1), np.ones((2, 1)), np.ones(2))
    with pytest.raises(ValueError):
        JacksonScenario(np.full((1, 2, 2), 0.7), np.ones((2, 1)), np.ones(2))


def test_jackson_game_uses_nu():
    scen = jackson_scenario(3, 2, seed=0)
    game = make_jackson_game(scen)
    assert game.coupling.x == pytest.approx(scen.nu)
    assert all(s.sense == "ge" for s in game.spaces)


@pytest.mark.parametrize("kind", ["power", "jackson"])
def test_scenario_round_trip(tmp_path, kind):
    scen = generate_scenarios(kind, {"count": 1}, 5)[0] if kind == "jackson" else \
        power_scenario(2, 3, "multi", seed=5)
    path = tmp_path / "s.json"
    save_scenario(scen, path)
    back = load_scenario(path)
    assert back.to_dict() == scen.to_dict()
    assert type(make_game(back)) is type(make_game(scen))


def test_scenario_file_needs_version(tmp_path):
    d = power_scenario(2, 2, seed=0).to_dict()
    d.pop("version")
    with pytest.raises(ValueError):
        scenario_from_dict(d)
    d["version"] = 99
    with pytest.raises(ValueError):
        scenario_from_dict(d)
    with pytest.raises(ValueError):
        scenario_from_dict({"version": 1, "kind": "optical"})
