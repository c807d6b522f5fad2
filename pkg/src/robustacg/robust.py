"""Worst-case observations and the robust utility.

Each player guards against an adversary that moves its observation ``f_n``
anywhere inside a Euclidean ball (observation mode) or perturbs the
normalised coupling coefficients of a log-family game per dimension
(parameter mode). ``psi`` is the utility at the adversary's best move.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError
from .game import _frozen, project_rows

FP_DAMPING = 0.5
FP_TOL = 1e-10
FP_MAX_ITER = 200
_FALLBACK_ITERS = 80


@dataclass(frozen=True)
class UncertaintySpec:
    """Uncertainty radii per player (observation) or per player and dimension
    (parameter). With ``relative`` the radius is a fraction of the nominal
    observation norm (or of the nominal coupling-ratio norm).
    """

    mode: str
    radii: np.ndarray
    relative: bool = False

    def __post_init__(self):
        if self.mode not in ("observation", "parameter"):
            raise ValueError(f"unknown uncertainty mode {self.mode!r}")
        radii = _frozen(self.radii)
        expected = 1 if self.mode == "observation" else 2
        if radii.ndim != expected:
            raise ValueError(f"{self.mode} radii must be {expected}-d")
        if not np.all(np.isfinite(radii)) or np.any(radii < 0):
            raise ValueError("uncertainty radii must be finite and nonnegative")
        object.__setattr__(self, "radii", radii)

    @classmethod
    def observation(cls, radii, relative=False):
        return cls("observation", np.atleast_1d(radii), relative)

    @classmethod
    def parameter(cls, radii, relative=False):
        return cls("parameter", np.atleast_2d(radii), relative)

    @classmethod
    def uniform(cls, game, eps, mode="observation", relative=False):
        """Same radius for every player (and dimension)."""
        shape = (game.n_players,) if mode == "observation" else (game.n_players, game.n_dims)
        return cls(mode, np.full(shape, float(eps)), relative)

    @classmethod
    def none(cls, game):
        return cls.uniform(game, 0.0)

    @property
    def is_zero(self):
        return not np.any(self.radii > 0)

    def check(self, game):
        n, k = game.n_players, game.n_dims
        shape = (n,) if self.mode == "observation" else (n, k)
        if self.radii.shape != shape:
            raise ValueError(f"radii shape {self.radii.shape} does not match game {shape}")
        if self.mode == "parameter" and game.family.tag != "log-theta":
            raise ValueError("parameter-level uncertainty needs the log-theta family")

    def absolute(self, game, f):
        """Absolute radii at nominal observations ``f`` (shape (..., N, K))."""
        if self.mode == "observation":
            if not self.relative:
                return np.broadcast_to(self.radii, f.shape[:-1])
            return self.radii * np.linalg.norm(f, axis=-1)
        if not self.relative:
            return self.radii
        ratios = game._xoff / game.xnn[:, None, :]
        return self.radii * np.linalg.norm(ratios, axis=1)


@dataclass(frozen=True)
class WorstCaseResult:
    f_tilde: np.ndarray
    direction: np.ndarray
    radius: float
    residual: float
    iterations: int
    degenerate: bool = False
    shrunk: bool = False
    fallback: bool = False


# ---------------------------------------------------------------------------
# Observation-mode worst case (batched core)
# ---------------------------------------------------------------------------

def _directions(game, a, ft, idx):
    df = game.dim_first(a, ft, idx)[1]
    nrm = np.linalg.norm(df, axis=-1, keepdims=True)
    safe = np.where(nrm > 0, nrm, 1.0)
    return np.where(nrm > 0, df / safe, 0.0), nrm[..., 0]


def _solve_multiplier(game, a, f, r, idx):
    """Exact boundary minimiser via the stationarity ``-u_f(f+t) = 2 lam t``.

    Per-dimension shifts solve a monotone scalar equation for a given
    multiplier; the multiplier is then bisected until ``||t|| = r``.
    Used when the damped fixed point stalls.
    """
    def shifts(lam):
        lo = np.zeros_like(f)
        hi = np.broadcast_to(r[..., None], f.shape).copy()
        for _ in range(_FALLBACK_ITERS):
            mid = 0.5 * (lo + hi)
            g = -game.dim_first(a, f + mid, idx)[1] - 2 * lam[..., None] * mid
            lo = np.where(g > 0, mid, lo)
            hi = np.where(g > 0, hi, mid)
        return 0.5 * (lo + hi)

    g0 = np.linalg.norm(game.dim_first(a, f, idx)[1], axis=-1)
    lam_hi = g0 / (2 * np.where(r > 0, r, 1.0)) + 1e-300
    log_lo, log_hi = np.log(lam_hi) - 60.0, np.log(lam_hi)
    for _ in range(_FALLBACK_ITERS):
        mid = 0.5 * (log_lo + log_hi)
        too_long = np.linalg.norm(shifts(np.exp(mid)), axis=-1) > r
        log_lo = np.where(too_long, mid, log_lo)
        log_hi = np.where(too_long, log_hi, mid)
    return f + shifts(np.exp(0.5 * (log_lo + log_hi)))


def worst_case_batch(game, a, f, r, idx=slice(None), f_init=None, warn=True):
    """Worst-case observations for a batch of (action, observation) rows.

    ``a`` and ``f`` have shape (..., K) matching the per-player constants
    selected by ``idx``; ``r`` holds absolute radii of shape (...).
    Returns ``(f_tilde, direction, info)`` where ``info`` is a dict of
    per-row flags and diagnostics.
    """
    a = np.asarray(a, float)
    f = np.asarray(f, float)
    r = np.broadcast_to(np.asarray(r, float), f.shape[:-1])
    ft = f.copy() if f_init is None else np.array(f_init, float)
    _, g0 = _directions(game, a, f, idx)
    degenerate = g0 == 0
    active = (r > 0) & ~degenerate
    iters = 0
    residual = np.zeros(f.shape[:-1])
    if np.any(active):
        # full steps while the residual at least halves, damped steps otherwise
        weight = np.ones(f.shape[:-1])
        prev = np.full(f.shape[:-1], np.inf)
        for iters in range(1, FP_MAX_ITER + 1):
            theta, _ = _directions(game, a, ft, idx)
            target = f - r[..., None] * theta
            residual = np.where(active, np.linalg.norm(target - ft, axis=-1), 0.0)
            if residual.max() <= FP_TOL:
                ft = target
                break
            weight = np.where(residual > 0.5 * prev, FP_DAMPING, weight)
            prev = residual
            ft = ft + weight[..., None] * (target - ft)
        else:
            stalled = residual > FP_TOL
            if warn:
                warnings.warn(f"worst-case fixed point stalled on {int(stalled.sum())} rows "
                              f"(residual {residual.max():.2e}); using the multiplier solve",
                              RuntimeWarning, stacklevel=2)
            exact = _solve_multiplier(game, a, f, np.where(stalled, r, 0.0), idx)
            ft = np.where(stalled[..., None], exact, ft)
    fallback = bool(iters == FP_MAX_ITER and np.any(residual > FP_TOL))
    theta, _ = _directions(game, a, ft, idx)
    theta = np.where(active[..., None], theta, 0.0)
    ft = f - r[..., None] * theta
    # keep the worst case inside the utility domain
    shrunk = np.zeros(f.shape[:-1], bool)
    bad = np.any(game.domain_violation(a, ft, idx), axis=-1)
    scale = np.ones(f.shape[:-1])
    while np.any(bad) and scale.min() > 1e-12:
        shrunk |= bad
        scale = np.where(bad, 0.5 * scale, scale)
        ft = f - (scale * r)[..., None] * theta
        bad = np.any(game.domain_violation(a, ft, idx), axis=-1)
    info = {"degenerate": degenerate, "shrunk": shrunk, "residual": residual,
            "iterations": iters, "fallback": fallback, "radius": scale * r}
    return ft, theta, info


def _parameter_shift(game, a, spec, n=None):
    """Worst-case increase of the observation under coupling-ratio errors."""
    a = np.asarray(a, float)
    f = game.observations(a)
    eps = spec.absolute(game, f)
    sq = np.sum(a ** 2, axis=-2, keepdims=True) - a ** 2     # ||a_{-n}^k||^2
    others = np.sqrt(np.maximum(sq, 0.0))
    shift = game.xnn * eps * others
    if n is None:
        return f, shift
    return f[..., n, :], shift[..., n, :]


def worst_case_observation(game, a, n, spec):
    """Observation in player ``n``'s uncertainty set that minimises its utility."""
    spec.check(game)
    if not 0 <= n < game.n_players:
        raise IndexError(f"player index {n} out of range")
    a = np.asarray(a, float)
    if spec.mode == "parameter":
        f, shift = _parameter_shift(game, a, spec, n)
        nrm = np.linalg.norm(shift)
        direction = -shift / nrm if nrm > 0 else np.zeros_like(shift)
        return WorstCaseResult(f + shift, direction, float(nrm), 0.0, 0, nrm == 0)
    f = game.observations(a)[n]
    r = spec.radii[n] * (np.linalg.norm(f) if spec.relative else 1.0)
    ft, theta, info = worst_case_batch(game, a[n], f, np.asarray(r), n)
    return WorstCaseResult(ft, theta, float(info["radius"]), float(info["residual"]),
                           info["iterations"], bool(info["degenerate"]),
                           bool(info["shrunk"]), info["fallback"])


def worst_case_all(game, a, spec, f_init=None):
    """Worst-case observations of every player at (a batch of) profiles."""
    a = np.asarray(a, float)
    if spec.mode == "parameter":
        f, shift = _parameter_shift(game, a, spec)
        return f + shift
    f = game.observations(a)
    if spec.is_zero:
        return f
    r = spec.absolute(game, f)
    ft, _, _ = worst_case_batch(game, a, f, r, f_init=f_init)
    return ft


def psi_all(game, a, spec, f_init=None):
    """Robust utilities of all players, shape (..., N)."""
    ft = worst_case_all(game, a, spec, f_init)
    return game.dim_values(np.asarray(a, float), ft).sum(axis=-1)


def psi(game, a, n, spec):
    """Robust utility ``Psi_n``: utility at the worst-case observation."""
    res = worst_case_observation(game, a, n, spec)
    a = np.asarray(a, float)
    return float(game.dim_values(a[n], res.f_tilde, n).sum())


def psi_gradient(game, a, spec, f_init=None):
    """Gradient of every ``Psi_n`` in its own action, shape (N, K).

    The adversary's set does not depend on ``a_n``, so the envelope theorem
    gives the plain own-action gradient at the worst-case observation. In
    parameter mode the worst case does not move with ``a_n`` either.
    """
    a = np.asarray(a, float)
    ft = worst_case_all(game, a, spec, f_init)
    return game.dim_first(a, ft)[0], ft


def robust_vi_mapping(game, a, spec):
    return -psi_gradient(game, a, spec)[0]


# ---------------------------------------------------------------------------
# Log-family closed forms
# ---------------------------------------------------------------------------

def _others_norm(a):
    sq = np.sum(a ** 2, axis=0, keepdims=True) - a ** 2
    return np.sqrt(np.maximum(sq, 0.0))


def robust_avi_mapping(avi, a, spec):
    """Affine mapping plus the per-dimension robustness term
    ``eps_n^k * ||a_{-n}^k||``."""
    from .vi import avi_mapping
    if spec.mode != "parameter":
        raise ValueError("the robust affine mapping needs parameter-level radii")
    a = np.asarray(a, float)
    eps = spec.absolute(avi.game, avi.game.observations(a))
    return avi_mapping(avi, a) + eps * _others_norm(a)


def log_offsets(avi, a, spec=None):
    """Effective offsets ``w + sum_{m != n} M_nm a_m (+ eps ||a_{-n}||)``."""
    a = np.asarray(a, float)
    own = np.einsum("nnk->nk", avi.blocks) * a
    base = avi.w + np.einsum("nmk,mk->nk", avi.blocks, a) - own
    if spec is not None and not spec.is_zero:
        if spec.mode != "parameter":
            raise ValueError("closed-form responses need parameter-level radii")
        base = base + spec.absolute(avi.game, avi.game.observations(a)) * _others_norm(a)
    return base


def water_fill(base, lower, upper, total, ge=False, prox=None):
    """Clip ``L - base`` (or ``(L - base + prox) / 2``) with the level chosen
    so that the sum constraint is met with equality.

    Returns ``(a, level)``. Upper bounds that cannot absorb the budget end up
    saturated, and then ``level`` is reported as ``inf``.
    """
    target = -np.asarray(base, float) if prox is None else 0.5 * (np.asarray(prox) - base)
    lower = np.broadcast_to(lower, target.shape)
    upper = np.broadcast_to(upper, target.shape)
    total = np.broadcast_to(np.asarray(total, float), target.shape[:-1])
    saturated = upper.sum(axis=-1) <= total
    a = project_rows(target, lower, upper, np.where(saturated, upper.sum(axis=-1), total),
                     ge, equality=True)
    free = (a > lower + 1e-12) & (a < upper - 1e-12)
    count = free.sum(axis=-1)
    shift = np.where(free, a - target, 0.0).sum(axis=-1) / np.maximum(count, 1)
    # no free dimension: KKT only brackets the shift; take the smallest consistent one
    at_upper = a >= upper - 1e-12
    low_end = np.where(at_upper, upper - target, -np.inf).max(axis=-1)
    high_end = np.where(~at_upper, lower - target, np.inf).min(axis=-1)
    bracket = np.where(np.isfinite(low_end), low_end, high_end)
    level = np.where(count > 0, shift, bracket) * (1.0 if prox is None else 2.0)
    level = np.where(saturated, np.inf, level)
    return a, level


def robust_best_response_log(avi, a, n, spec, space):
    """Closed-form (robust) water-filling best response of player ``n``.

    Returns ``(a_n, lam)`` with ``lam`` the budget multiplier, related to the
    water level ``L`` by ``L = lam ** (1/theta)``.
    """
    if space.sense != "le":
        raise ValueError("water-filling needs an upper-sum budget")
    base = log_offsets(avi, a, spec)[n]
    if not np.all(np.isfinite(base)):
        raise ConvergenceError("non-finite offsets in water-filling")
    a_n, level = water_fill(base, space.lower, space.upper, space.total)
    lam = float(level) ** avi.theta if np.isfinite(level) and level > 0 else 0.0
    return a_n, lam
