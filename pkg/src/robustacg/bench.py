"""Seeded experiment sweeps, metrics and result files.

Every record carries the run seed and a hash of the experiment config, so
any row can be replayed. Sweeps write a wide CSV (fixed header), a long CSV
(one metric per row, ready for plotting) and a JSON file with the records.
"""

import csv
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import BoundUnavailableError, InstabilityError
from .models import (generate_scenarios, load_scenario, make_game, make_jackson_game,
                     jackson_scenario, total_delay, power_scenario, make_power_game)
from .robust import UncertaintySpec, psi_all
from .solvers import (SolverConfig, OpportunisticConfig, best_response, best_response_sweep,
                      gradient_play, jacobi_update, opportunistic_run, run_distributed,
                      social_utility)
from .vi import build_upsilon, is_p_matrix, theorem2_distance_bound

SOLVERS = ("proximal", "iwfa", "gradient", "jacobi")


@dataclass(frozen=True)
class ExperimentConfig:
    """One sweep: scenarios (generated or from a file) times uncertainty radii.

    ``eps_list`` holds radii relative to the nominal observation norm when
    ``relative`` is true. ``scenario_params`` is passed to the generator of
    ``kind`` (``power`` or ``jackson``); ``cross_scale`` multiplies power
    cross gains (the 50%-150% parameter variation study).
    """

    kind: str = "power"
    scenario_params: dict = field(default_factory=lambda: {"n": 3, "k": 8, "regime": "unique"})
    scenario_file: Optional[str] = None
    solver: str = "proximal"
    eps_list: tuple = (0.0, 0.1, 0.3, 0.5)
    relative: bool = True
    reps: int = 10
    seed: int = 0
    out_dir: Optional[str] = None
    max_iter: int = 5000
    tol: float = 1e-6
    cross_scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "eps_list", tuple(float(e) for e in self.eps_list))
        if any(not math.isfinite(e) or e < 0 for e in self.eps_list):
            raise ValueError("uncertainty radii must be finite and nonnegative")
        if self.reps < 1:
            raise ValueError("repetitions must be at least 1")
        if self.solver not in SOLVERS:
            raise ValueError(f"unknown solver {self.solver!r}; choose from {SOLVERS}")
        if self.kind not in ("power", "jackson"):
            raise ValueError(f"unknown scenario kind {self.kind!r}")

    def as_dict(self):
        d = asdict(self)
        d.pop("out_dir")            # where results go does not change them
        return d

    @property
    def config_hash(self):
        blob = json.dumps(self.as_dict(), sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def solver_config(self):
        return SolverConfig(max_iter=self.max_iter, tol=self.tol)


@dataclass
class MetricsRecord:
    config_hash: str
    seed: int
    rep: int
    eps: float
    v_star: float = math.nan
    u_tilde: float = math.nan
    ratio: float = math.nan
    distance: float = math.nan
    distance_bound: float = math.nan
    c_sm: float = math.nan
    p_matrix: bool = False
    eta: float = math.nan
    delay_metric: float = math.nan
    converged: bool = False
    iterations: int = 0
    error: str = ""


METRIC_COLUMNS = [f.name for f in fields(MetricsRecord)]
LONG_COLUMNS = ["config_hash", "seed", "rep", "eps", "metric", "value"]
_LONG_METRICS = ("v_star", "u_tilde", "ratio", "distance", "distance_bound", "eta",
                 "delay_metric", "converged", "iterations")


def _solve(game, spec, config, a0=None):
    sc = config.solver_config()
    if config.solver == "proximal":
        return run_distributed(game, spec, sc, a0)
    if config.solver == "iwfa":
        return best_response_sweep(game, spec, sc, a0)
    if config.solver == "gradient":
        return gradient_play(game, sc, a0, spec)
    return jacobi_update(game, sc, a0, spec)


def _scenarios(config):
    if config.scenario_file:
        return [load_scenario(config.scenario_file)] * config.reps
    params = dict(config.scenario_params, count=config.reps)
    scen = generate_scenarios(config.kind, params, config.seed)
    if config.kind == "power" and config.cross_scale != 1.0:
        scen = [s.with_cross_scale(config.cross_scale) for s in scen]
    return scen


def _one_scenario(config, rep, scenario):
    game = make_game(scenario)
    h = config.config_hash
    seed = config.seed
    out = []
    try:
        rep_vi = build_upsilon(game)
        p_mat = rep_vi.p_matrix if game.n_players <= 16 else False
        nominal = _solve(game, UncertaintySpec.none(game), config)
        a_star = nominal.final
        v_star = social_utility(game, a_star)
        d_star = total_delay(scenario, a_star) if config.kind == "jackson" else None
    except Exception as exc:            # recorded, not fatal
        return [MetricsRecord(h, seed, rep, e, error=f"{type(exc).__name__}: {exc}")
                for e in config.eps_list]
    for eps in config.eps_list:
        rec = MetricsRecord(h, seed, rep, eps, v_star=v_star, c_sm=rep_vi.c_sm, p_matrix=p_mat)
        try:
            if eps == 0:
                run, a_t, u_t = nominal, a_star, v_star
            else:
                spec = UncertaintySpec.uniform(game, eps, relative=config.relative)
                run = _solve(game, spec, config, a_star)
                a_t = run.final
                u_t = float(psi_all(game, a_t, spec).sum())
                delta = spec.absolute(game, game.observations(a_t))
                try:
                    rec.distance_bound = theorem2_distance_bound(delta, rep_vi.c_sm)
                except BoundUnavailableError:
                    pass
            rec.u_tilde = u_t
            rec.ratio = u_t / v_star if v_star != 0 else math.nan
            rec.distance = float(np.linalg.norm(a_t - a_star))
            rec.converged = bool(run.converged)
            rec.iterations = int(run.iterations)
            if eps == 0:
                rec.distance_bound = 0.0
            if d_star is not None:
                rec.delay_metric = 100.0 * (total_delay(scenario, a_t) - d_star) / d_star
        except Exception as exc:
            rec.error = f"{type(exc).__name__}: {exc}"
        out.append(rec)
    return out


def run_experiment(config):
    """Nominal and robust solves for every (repetition, radius) pair.

    Writes ``metrics.csv``, ``metrics_long.csv`` and ``runs.json`` into
    ``config.out_dir`` when it is set. Rows are sorted by (rep, eps).
    """
    records = []
    for rep, scenario in enumerate(_scenarios(config)):
        records.extend(_one_scenario(config, rep, scenario))
    records.sort(key=lambda r: (r.rep, r.eps))
    if config.out_dir:
        write_records(records, config)
    return records


def _fmt(v):
    if isinstance(v, bool):
        return int(v)
    if isinstance(v, float):
        return repr(v)
    return v


def write_records(records, config):
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "metrics.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(METRIC_COLUMNS)
        for r in records:
            w.writerow([_fmt(getattr(r, c)) for c in METRIC_COLUMNS])
    with open(out / "metrics_long.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(LONG_COLUMNS)
        for r in records:
            for m in _LONG_METRICS:
                w.writerow([r.config_hash, r.seed, r.rep, _fmt(r.eps), m, _fmt(getattr(r, m))])
    with open(out / "runs.json", "w") as fh:
        json.dump({"config": config.as_dict(), "config_hash": config.config_hash,
                   "records": [_json_record(r) for r in records]}, fh, indent=1, sort_keys=True)


def _json_record(r):
    d = asdict(r)
    return {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in d.items()}


# ---------------------------------------------------------------------------
# Jackson studies
# ---------------------------------------------------------------------------

def worst_case_stable(game, a, spec, margin=1e-6):
    """Every queue keeps positive residual capacity at the worst-case load."""
    return bool(np.all(_per_dim_robust(game, a, spec) > margin))


def _per_dim_robust(game, a, spec):
    from .robust import worst_case_all
    ft = worst_case_all(game, a, spec)
    return game.dim_values(np.asarray(a, float), ft)


def convergence_probability(seeds, deficits, eps_list, n=5, k=3, config=None, **params):
    """Fraction of seeds whose robust proximal run converges to a stable RNE.

    A run counts when the iteration converges and every queue stays stable
    under the worst-case load of its uncertainty set. Returns rows
    ``(deficit, eps, probability)`` where ``deficit`` is the total routing
    probability ``1 - r_m0``.
    """
    seeds = list(seeds)
    if not seeds:
        raise ValueError("need at least one seed")
    config = config or SolverConfig(max_iter=500)
    table = []
    for deficit in deficits:
        games = [make_jackson_game(jackson_scenario(n, k, deficit, seed=s, **params)) for s in seeds]
        for eps in eps_list:
            hits = 0
            for game in games:
                spec = UncertaintySpec.uniform(game, eps, relative=True)
                try:
                    run = run_distributed(game, spec, config)
                except (InstabilityError, ValueError):
                    continue
                hits += run.converged and worst_case_stable(game, run.final, spec)
            table.append((float(deficit), float(eps), hits / len(seeds)))
    return table


def execution_noise(seed, eps):
    """Perturbation hook: realised rates are ``psi * (1 + eps * u)`` with
    ``u`` uniform in [-1, 1], drawn from a stream keyed by ``(seed, t)``."""
    def perturb(t, a):
        rng = np.random.default_rng([int(seed), int(t)])
        return a * (1.0 + eps * rng.uniform(-1.0, 1.0, np.shape(a)))
    return perturb


def delay_metric(scenario, psi, d_star):
    """Percentage delay excess ``100 (d - d*) / d*``; ``inf`` if unstable."""
    try:
        return 100.0 * (total_delay(scenario, psi) - d_star) / d_star
    except InstabilityError:
        return math.inf


def jackson_delay_study(seed, eps, n=5, k=3, deficit=0.5, max_iter=200):
    """Non-robust (gradient play, Jacobi) against robust proximal runs when
    every update is executed with multiplicative rate noise of size ``eps``.

    All three runs see the same noise stream. Returns the final delay
    metrics and the robust run's convergence flag.
    """
    sc = jackson_scenario(n, k, deficit, seed=seed)
    game = make_jackson_game(sc)
    nominal = best_response(game, UncertaintySpec.none(game), None)
    d_star = total_delay(sc, nominal)
    cfg = SolverConfig(max_iter=max_iter)
    noise = execution_noise(seed, eps)
    grad = gradient_play(game, cfg, perturb=noise)
    jac = jacobi_update(game, cfg, perturb=noise)
    spec = UncertaintySpec.uniform(game, eps, relative=True)
    rob = run_distributed(game, spec, cfg, perturb=noise)
    return {"seed": seed, "eps": eps,
            "D_gradient": delay_metric(sc, grad.final, d_star),
            "D_jacobi": delay_metric(sc, jac.final, d_star),
            "D_robust": delay_metric(sc, rob.final, d_star),
            "robust_converged": bool(rob.converged),
            "robust_iterations": int(rob.iterations)}


# ---------------------------------------------------------------------------
# Opportunistic study
# ---------------------------------------------------------------------------

# water-filling in player order: cheap, and stable under strong interference
STUDY_OPPORTUNISTIC = OpportunisticConfig(
    stage1="iwfa", solver=SolverConfig(scheme="sequential", max_iter=500))


def opportunistic_study(seeds, regime, n=4, k=8, config=None):
    """Gain ``eta`` of the opportunistic procedure on seeded power games."""
    out = []
    for s in seeds:
        game = make_power_game(power_scenario(n, k, regime, seed=s))
        tr = opportunistic_run(game, config or STUDY_OPPORTUNISTIC)
        stage1 = social_utility(game, tr.profiles[0])
        out.append({"seed": s, "regime": regime, "eta": tr.meta["eta"],
                    "stage1": stage1, "final": tr.meta["social_utility"],
                    "triggered": tr.meta["triggered"], "final_eps": tr.meta["final_eps"]})
    return out


# ---------------------------------------------------------------------------
# Printed checkpoints
# ---------------------------------------------------------------------------

CHECKPOINT_PROFILES = ((0.5, 0.5, 0.4, 0.6), (0.4, 0.6, 0.9, 0.1))
CHECKPOINT_DISTANCE = 0.7211
CHECKPOINT_BOUND = 1.3115
CHECKPOINT_UPSILON = ((1.5432, -0.016), (-0.0012, 1.221))
CHECKPOINT_DELTA = (0.8, 0.8)


@dataclass
class Check:
    name: str
    value: object
    expected: object
    passed: Optional[bool]        # None marks reference-only entries
    note: str = ""


def paper_checkpoints():
    """Recompute the published power-control example numbers.

    Returns a dict with the list of checks and an overall ``passed`` flag.
    The utility-gap figures depend on unpublished inputs and are recorded
    as reference-only.
    """
    a, b = (np.array(p) for p in CHECKPOINT_PROFILES)
    dist = float(np.linalg.norm(a - b))
    c_sm = float(np.linalg.norm(CHECKPOINT_DELTA) / CHECKPOINT_BOUND)
    checks = [
        Check("profile distance", round(dist, 6), CHECKPOINT_DISTANCE,
              abs(dist - CHECKPOINT_DISTANCE) <= 5e-4),
        Check("distance within printed bound", round(dist, 6), CHECKPOINT_BOUND,
              dist <= CHECKPOINT_BOUND),
        Check("printed curvature matrix is a P-matrix", is_p_matrix(CHECKPOINT_UPSILON), True,
              bool(is_p_matrix(CHECKPOINT_UPSILON))),
        Check("monotonicity constant implied by the bound", round(c_sm, 6), None, None,
              "back-derived from |(0.8, 0.8)| / 1.3115"),
        Check("bound from the implied constant", round(theorem2_distance_bound(CHECKPOINT_DELTA, c_sm), 6),
              CHECKPOINT_BOUND, None, "consistency of the back-derivation"),
        Check("utility gap estimate", 1.02, 1.015, None,
              "simulated value; inputs unpublished, not recomputable"),
    ]
    return {"checks": [asdict(c) for c in checks],
            "passed": all(c.passed for c in checks if c.passed is not None)}
