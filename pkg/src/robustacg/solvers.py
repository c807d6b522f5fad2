"""Equilibrium-seeking dynamics.

* proximal response dynamics (each player maximises its robust utility minus
  a quadratic penalty for moving away from its previous action),
* simultaneous (robust) water-filling best responses,
* projected gradient play and damped Jacobi best responses (baselines),
* the opportunistic procedure that grows the uncertainty radius while the
  social utility keeps improving.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConvergenceError
from .game import project_rows, utilities
from .robust import (UncertaintySpec, log_offsets, psi_all, psi_gradient,
                     water_fill, worst_case_all, worst_case_batch)
from .vi import build_avi, build_upsilon

BACKTRACK = 0.5
THIRD_PARTIAL_TOL = 1e-12


@dataclass(frozen=True)
class SolverConfig:
    max_iter: int = 5000
    tol: float = 1e-6
    scheme: str = "simultaneous"
    step: Optional[float] = None
    inner_tol: float = 1e-8
    inner_max_iter: int = 2000
    closed_form: bool = True

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if not 0 < self.tol < 1:
            raise ValueError("tol must lie in (0, 1)")
        if self.scheme not in ("simultaneous", "sequential"):
            raise ValueError(f"unknown update scheme {self.scheme!r}")


@dataclass
class RunTrace:
    """Iterates of a run. ``profiles[t]`` is the profile after ``t`` updates."""

    profiles: np.ndarray
    utilities: np.ndarray
    steps: np.ndarray
    converged: bool
    iterations: int
    method: str
    preconditions: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @property
    def final(self):
        return self.profiles[-1]

    def as_dict(self):
        return {
            "method": self.method,
            "converged": self.converged,
            "iterations": self.iterations,
            "steps": self.steps.tolist(),
            "utilities": self.utilities.tolist(),
            "profiles": self.profiles.tolist(),
            "preconditions": self.preconditions,
            "meta": {k: v for k, v in self.meta.items() if _jsonable(v)},
        }


def _jsonable(v):
    return isinstance(v, (bool, int, float, str, list, type(None)))


# ---------------------------------------------------------------------------
# Generic inner solver
# ---------------------------------------------------------------------------

def projected_gradient_ascent(gradient, x0, lower, upper, total, ge,
                              tol=1e-8, max_iter=2000, equality=False, objective=None):
    """Maximise a smooth concave function row by row over box-plus-sum sets.

    ``gradient(x)`` returns the row gradients of the (R, K) batch. Steps
    follow the projection arc with backtracking (shrink factor 0.5) until
    the local Lipschitz test ``(g(x) - g(c)) . d <= |d|^2 / s`` holds, which
    gives sufficient increase without comparing nearly equal values. If ``objective``
    is given, candidates that lower it beyond rounding are also rejected.
    Stops when every row's residual ``||P(x + g) - x||`` is at most ``tol``.

    Returns ``(x, residual, iterations)``; raises ``ConvergenceError`` if the
    iteration cap is hit.
    """
    proj = lambda v: project_rows(v, lower, upper, total, ge, equality)
    x = proj(np.array(x0, float))
    step = np.ones(x.shape[0])
    g = gradient(x)
    val = objective(x) if objective is not None else None
    for it in range(1, max_iter + 1):
        residual = np.linalg.norm(proj(x + g) - x, axis=-1)
        if residual.max() <= tol:
            return x, residual, it - 1
        todo = residual > tol
        for _ in range(60):
            cand = proj(x + step[:, None] * g)
            d = cand - x
            gc = gradient(cand)
            # local Lipschitz test; both sides are O(|d|^2), so rounding in
            # g . d (dominated by the budget multiplier) never decides it
            dd = np.sum(d * d, axis=-1)
            ok = np.sum((g - gc) * d, axis=-1) <= dd / np.maximum(step, 1e-300)
            if objective is not None:
                cval = objective(cand)
                ok &= cval >= val - 1e-12 * (1 + np.abs(val))
            ok |= ~todo
            if ok.all():
                break
            step = np.where(ok, step, BACKTRACK * step)
        x = np.where(todo[:, None], cand, x)
        g = np.where(todo[:, None], gc, g)
        if objective is not None:
            val = np.where(todo, cval, val)
        step = np.where(todo, np.minimum(2.0 * step, 1e3), step)
    raise ConvergenceError("projected gradient ascent hit its iteration cap",
                           residual=float(residual.max()))


# ---------------------------------------------------------------------------
# Proximal response
# ---------------------------------------------------------------------------

def _uses_closed_form(game, spec, config):
    return (config.closed_form and game.family.tag == "log-theta"
            and (spec.is_zero or spec.mode == "parameter"))


def _rows_bounds(game, rows):
    lower, upper, total, ge = game.bounds
    return lower[rows], upper[rows], total[rows], ge[rows]


def _prox_generic(game, spec, b, rows, config):
    """Maximise ``Psi_n(a_n, b_-n) - 0.5||a_n - b_n||^2`` for players in ``rows``."""
    b = np.asarray(b, float)
    rows = np.asarray(rows)
    f_all = game.observations(b)
    f = f_all[rows]
    if spec.mode == "parameter":
        shift = worst_case_all(game, b, spec) - f_all
        shift = shift[rows]
    radius = None if spec.mode == "parameter" else spec.absolute(game, f_all)[rows]
    cache = {"ft": f.copy()}

    def tilde(x):
        if spec.mode == "parameter":
            return f + shift
        if spec.is_zero:
            return f
        ft, _, _ = worst_case_batch(game, x, f, radius, rows, f_init=cache["ft"])
        cache["ft"] = ft
        return ft

    anchor = b[rows]

    def gradient(x):
        return game.dim_first(x, tilde(x), rows)[0] - (x - anchor)

    x, _, _ = projected_gradient_ascent(gradient, anchor, *_rows_bounds(game, rows),
                                        tol=config.inner_tol, max_iter=config.inner_max_iter)
    return x


def _prox_closed_form(game, spec, b, rows):
    avi = build_avi(game)
    base = log_offsets(avi, b, None if spec.is_zero else spec)[rows]
    lower, upper, total, ge = _rows_bounds(game, rows)
    a, _ = water_fill(base, lower, upper, total, ge, prox=np.asarray(b, float)[rows])
    return a


def proximal_map(game, spec, b, rows=None, config=None):
    """Proximal responses of the players in ``rows`` (default: all) to ``b``.

    Log-theta games with no or parameter-level uncertainty use the closed
    form ``a = clip((L - offsets + b_n) / 2)`` with the level ``L`` set by the
    budget, and linear games project ``b_n`` plus their constant gradient;
    everything else runs projected gradient ascent.
    """
    config = config or SolverConfig()
    spec.check(game)
    rows = np.arange(game.n_players) if rows is None else np.atleast_1d(rows)
    if _uses_closed_form(game, spec, config):
        return _prox_closed_form(game, spec, b, rows)
    if config.closed_form and game.family.tag == "linear-jackson":
        # constant gradient, and the worst case only shifts the value
        b = np.asarray(b, float)[rows]
        lower, upper, total, ge = _rows_bounds(game, rows)
        return project_rows(b - game.xnn[rows], lower, upper, total, ge)
    return _prox_generic(game, spec, b, rows, config)


def proximal_step(game, spec, b, n, config=None):
    """Proximal response of player ``n`` to profile ``b``."""
    if not 0 <= n < game.n_players:
        raise IndexError(f"player index {n} out of range")
    return proximal_map(game, spec, b, [n], config)[0]


def third_partials_vanish(game, n_points=20, seed=0):
    """True if both mixed third partials are zero at sampled feasible profiles."""
    from .game import random_profile
    rng = np.random.default_rng(seed)
    for _ in range(n_points):
        a = random_profile(game, rng, interior=True)
        p = game.dim_partials(a, game.observations(a))
        if np.abs(p.daaf).max() > THIRD_PARTIAL_TOL or np.abs(p.daff).max() > THIRD_PARTIAL_TOL:
            return False
    return True


def convergence_preconditions(game):
    """Advisory report: P-property of the curvature matrix and vanishing
    third partials. Runs proceed regardless."""
    rep = build_upsilon(game)
    third = third_partials_vanish(game)
    return {"p_matrix": rep.p_matrix, "third_partials_zero": third,
            "satisfied": bool(rep.p_matrix and third)}


def _iterate(game, update, a0, config, method, spec=None, perturb=None, preconditions=None):
    """Shared driver: apply ``update`` until the step norm drops below ``tol``.

    ``perturb(t, a)`` (optional) returns the profile actually realised after
    iteration ``t``; the next update starts from it. Step norms always refer
    to the players' intended updates.
    """
    spec = spec if spec is not None else UncertaintySpec.none(game)
    a = game.project(np.asarray(a0, float))
    profiles = [a]
    utils = [psi_all(game, a, spec)]
    steps = []
    converged = False
    realised = a
    for t in range(1, config.max_iter + 1):
        new = update(realised)
        steps.append(float(np.linalg.norm(new - a)))
        a = new
        realised = a if perturb is None else game.project(perturb(t, a))
        profiles.append(realised)
        utils.append(psi_all(game, realised, spec))
        if steps[-1] <= config.tol:
            converged = True
            break
    return RunTrace(np.array(profiles), np.array(utils), np.array(steps), converged,
                    len(steps), method, preconditions or {})


def run_distributed(game, spec, config=None, a0=None, perturb=None):
    """Proximal-response dynamics started from ``a0``.

    Simultaneous updates by default; ``config.scheme="sequential"`` lets each
    player respond to the profile already updated by lower-indexed players.
    The convergence preconditions are evaluated and attached to the trace.
    """
    config = config or SolverConfig()
    spec.check(game)
    a0 = _start(game, a0)
    pre = convergence_preconditions(game)

    if config.scheme == "simultaneous":
        update = lambda b: proximal_map(game, spec, b, config=config)
    else:
        def update(b):
            cur = np.array(b)
            for n in range(game.n_players):
                cur[n] = proximal_map(game, spec, cur, [n], config)[0]
            return cur
    return _iterate(game, update, a0, config, "proximal", spec, perturb, pre)


def _start(game, a0):
    if a0 is None:
        lower, upper, _, ge = game.bounds
        return game.project(np.where(ge[:, None], upper, lower))
    return np.asarray(a0, float)


# ---------------------------------------------------------------------------
# Best responses and baselines
# ---------------------------------------------------------------------------

def best_response(game, spec, a):
    """Exact best responses of all players to profile ``a``.

    Log-family games water-fill on their (worst-case) offsets: closed form for
    log-theta with parameter-level radii; for rate-log under observation
    radii the worst case is evaluated at the current profile. Linear Jackson
    utilities are minimised by loading the cheapest classes first.
    """
    a = np.asarray(a, float)
    lower, upper, total, ge = game.bounds
    tag = game.family.tag
    if tag == "log-theta":
        if not (spec.is_zero or spec.mode == "parameter"):
            raise ValueError("log-theta water-filling needs parameter-level radii")
        base = log_offsets(build_avi(game), a, None if spec.is_zero else spec)
        return water_fill(base, lower, upper, total, ge)[0]
    if tag == "rate-log" and not game.family.high_sinr:
        base = worst_case_all(game, a, spec)
        return water_fill(base, lower, upper, total, ge)[0]
    if tag == "linear-jackson":
        return _linear_best_response(game)
    raise ValueError(f"no closed-form best response for {tag!r}")


def _linear_best_response(game):
    """Minimise ``sum_k x_nn^k a^k`` over each player's lower-sum set."""
    lower, upper, total, ge = game.bounds
    a = lower.copy()
    cost = game.xnn
    for n in range(game.n_players):
        need = total[n] - a[n].sum() if ge[n] else 0.0
        for k in np.argsort(cost[n], kind="stable"):
            if need <= 0:
                break
            add = min(upper[n, k] - a[n, k], need)
            a[n, k] += add
            need -= add
    return a


def best_response_sweep(game, spec, config=None, a0=None):
    """Closed-form best responses (iterative water-filling), simultaneous or
    in player order per ``config.scheme``.

    Under observation radii each response water-fills against the worst
    case at the current profile; a fixed point is a saddle point of every
    player's problem and hence a robust equilibrium. Undamped sweeps can
    cycle at larger radii; proximal dynamics are the robust default.
    """
    config = config or SolverConfig()
    spec.check(game)
    if game.family.tag not in ("log-theta", "rate-log"):
        raise ValueError("water-filling sweeps need a log-family game")
    if config.scheme == "simultaneous":
        update = lambda b: best_response(game, spec, b)
    else:
        def update(b):
            cur = np.array(b)
            for n in range(game.n_players):
                cur[n] = best_response(game, spec, cur)[n]
            return cur
    return _iterate(game, update, _start(game, a0), config, "best-response", spec)


def default_gradient_step(game, a):
    a = np.asarray(a, float)
    p = game.dim_partials(a, game.observations(a))
    return 0.1 / (1.0 + float(np.abs(p.daa).max()))


def gradient_play(game, config=None, a0=None, spec=None, perturb=None):
    """Projected gradient ascent on each player's (robust) utility with a
    fixed step."""
    config = config or SolverConfig()
    spec = spec if spec is not None else UncertaintySpec.none(game)
    a0 = _start(game, a0)
    step = default_gradient_step(game, a0) if config.step is None else config.step

    def update(b):
        grad, _ = psi_gradient(game, b, spec)
        return game.project(b + step * grad)
    trace = _iterate(game, update, a0, config, "gradient", spec, perturb)
    trace.meta["step"] = step
    return trace


def jacobi_update(game, config=None, a0=None, spec=None, perturb=None):
    """Damped Jacobi scheme: average the current profile with the best response."""
    config = config or SolverConfig()
    spec = spec if spec is not None else UncertaintySpec.none(game)
    return _iterate(game, lambda b: 0.5 * b + 0.5 * best_response(game, spec, b),
                    _start(game, a0), config, "jacobi", spec, perturb)


# ---------------------------------------------------------------------------
# Opportunistic expansion of the uncertainty region
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OpportunisticConfig:
    """Settings of the radius-expansion procedure.

    ``stage1`` picks the nominal solver (``"proximal"`` or ``"iwfa"``).
    Each expansion applies one proximal step at the grown radius; with
    ``resolve`` the robust game is instead solved to convergence.
    """

    chi: float = 0.05
    delta: float = 1e-4
    max_expansions: int = 40
    solver: SolverConfig = field(default_factory=SolverConfig)
    relative: bool = True
    stage1: str = "proximal"
    resolve: bool = False

    def __post_init__(self):
        if not 0 < self.chi < 1:
            raise ValueError("chi must lie in (0, 1)")
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if self.stage1 not in ("proximal", "iwfa"):
            raise ValueError("stage1 must be 'proximal' or 'iwfa'")


def multiple_equilibria_suspected(game):
    """Trigger: some player's own curvature is below its summed cross curvature."""
    rep = build_upsilon(game)
    return bool(np.any(rep.alpha < rep.beta.sum(axis=1)))


def social_utility(game, a):
    return float(utilities(game, a).sum())


def opportunistic_run(game, config=None, a0=None):
    """Solve the nominal game, then grow every radius as ``t * chi``.

    Each expansion moves the profile by one proximal step on the robust
    utilities (or a full robust solve with ``config.resolve``) and measures
    the nominal social utility of the result. Expansion continues while
    that utility rises by more than ``delta``. The best profile seen is
    returned, so the result is never worse than the nominal equilibrium.
    """
    config = config or OpportunisticConfig()
    none = UncertaintySpec.none(game)
    if config.stage1 == "proximal":
        stage1 = run_distributed(game, none, config.solver, a0)
    else:
        stage1 = best_response_sweep(game, none, config.solver, a0)
    v_star = social_utility(game, stage1.final)
    best_a, best_u = stage1.final, v_star
    history = [(0.0, v_star)]
    triggered = multiple_equilibria_suspected(game)
    eps = 0.0
    if triggered:
        prev_u, prev_a = v_star, stage1.final
        for t1 in range(1, config.max_expansions + 1):
            eps = t1 * config.chi
            spec = UncertaintySpec.uniform(game, eps, relative=config.relative)
            if config.resolve:
                a = run_distributed(game, spec, config.solver, prev_a).final
            else:
                a = proximal_map(game, spec, prev_a, config=config.solver)
            u = social_utility(game, a)
            history.append((eps, u))
            if u > best_u:
                best_a, best_u = a, u
            if not (u > prev_u and u - prev_u > config.delta):
                break
            prev_u, prev_a = u, a
    trace = RunTrace(np.array([stage1.final, best_a]),
                     np.array([utilities(game, stage1.final), utilities(game, best_a)]),
                     np.array([float(np.linalg.norm(best_a - stage1.final))]),
                     stage1.converged, stage1.iterations, "opportunistic", stage1.preconditions)
    trace.meta.update({"triggered": triggered, "v_star": v_star, "social_utility": best_u,
                       "eta": (best_u - v_star) / v_star if v_star != 0 else 0.0,
                       "final_eps": eps, "history": [list(h) for h in history]})
    return trace
