"""Robust equilibria of additively coupled games."""

from .errors import (BoundUnavailableError, ConvergenceError, DomainError, GridCapError,
                     InfeasibleSpaceError, InstabilityError)
from .game import (CouplingModel, GameInstance, StrategyProfile, StrategySpace, UtilityFamily,
                   check_assumptions, observation, random_profile, utilities, utility,
                   utility_gradients)
from .vi import (AviSystem, ViReport, analyze, avi_reversed_check, avi_uniqueness_check,
                 build_avi, build_upsilon, is_p_matrix, strong_monotonicity_constant,
                 theorem2_distance_bound, theorem3_distance_bound, vi_mapping, w_matrix)
from .robust import (UncertaintySpec, WorstCaseResult, psi, psi_all, psi_gradient,
                     robust_vi_mapping, water_fill, worst_case_all, worst_case_observation)
from .solvers import (OpportunisticConfig, RunTrace, SolverConfig, best_response,
                      best_response_sweep, gradient_play, jacobi_update, opportunistic_run,
                      proximal_map, proximal_step, run_distributed, social_utility)
from .models import (JacksonScenario, PowerControlScenario, generate_scenarios,
                     jackson_scenario, load_scenario, make_game, make_jackson_game,
                     make_log_theta_game, make_power_game, power_scenario, save_scenario,
                     total_delay)
from .bench import (ExperimentConfig, MetricsRecord, convergence_probability,
                    jackson_delay_study, opportunistic_study, paper_checkpoints,
                    run_experiment)

__version__ = "0.1.0"
