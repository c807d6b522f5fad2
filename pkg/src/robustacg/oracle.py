"""Brute-force references used to check the solvers.

Everything here is deliberately naive: equilibria come from exhaustive
search over a joint action grid, worst cases from dense sampling of the
uncertainty sphere, derivatives from central differences. None of it
shares code with the iterative solvers beyond evaluating utilities.
"""

from dataclasses import dataclass
from itertools import product
from typing import Optional

import numpy as np
from scipy.optimize import minimize
from scipy.sparse.csgraph import connected_components

from .errors import GridCapError
from .robust import psi_all, psi_gradient
from .vi import effective_box

GRID_CAP = 10 ** 7


@dataclass(frozen=True)
class GridSpec:
    """Joint action grid: ``points`` per axis of every player's box.

    ``tau`` fixes the equilibrium tolerance. When ``None`` each grid profile
    gets ``2 * spacing * g``, where ``g`` is the largest projected-gradient
    norm among the players at that profile.
    """

    points: int = 21
    tau: Optional[float] = None
    cap: int = GRID_CAP

    def __post_init__(self):
        if self.points < 3:
            raise ValueError("grid needs at least 3 points per axis")
        if self.tau is not None and self.tau < 0:
            raise ValueError("tolerance must be nonnegative")


def player_grid(game, n, points):
    """Feasible points of player ``n``'s per-axis grid, lexicographic order."""
    lo, hi = effective_box(game)
    axes = [np.linspace(lo[n, k], hi[n, k], points) for k in range(game.n_dims)]
    pts = np.array(list(product(*axes)))
    keep = np.array([game.spaces[n].is_feasible(p, 1e-9) for p in pts])
    if not keep.any():
        raise ValueError(f"no grid point is feasible for player {n}")
    return pts[keep]


def grid_spacing(game, points):
    lo, hi = effective_box(game)
    return float(np.max(hi - lo) / (points - 1))


def _joint(grids):
    """Stack every combination of per-player points: shape (M_1..M_N, N, K)."""
    mesh = np.meshgrid(*[np.arange(len(g)) for g in grids], indexing="ij")
    return np.stack([g[m] for g, m in zip(grids, mesh)], axis=-2)


@dataclass
class EquilibriumCells:
    """Grid profiles that pass the equilibrium test, grouped into clusters of
    grid-adjacent profiles."""

    profiles: np.ndarray      # (M, N, K), lexicographic grid order
    gains: np.ndarray         # largest unilateral improvement at each profile
    labels: np.ndarray        # cluster id per profile
    spacing: float
    tau: np.ndarray

    @property
    def n_cells(self):
        return int(self.labels.max() + 1) if self.labels.size else 0

    def __len__(self):
        return len(self.profiles)

    def representatives(self):
        """One profile per cluster: the smallest gain, ties to the earliest."""
        reps = []
        for c in range(self.n_cells):
            members = np.flatnonzero(self.labels == c)
            reps.append(self.profiles[members[np.argmin(self.gains[members])]])
        return np.array(reps)

    def contains(self, a, slack=1.0):
        """True if ``a`` lies within ``slack`` grid spacings (max-norm) of a cell."""
        if not len(self):
            return False
        d = np.abs(self.profiles - np.asarray(a, float)).max(axis=(1, 2))
        return bool(d.min() <= slack * self.spacing * (1 + 1e-9))

    def cell_of(self, a, slack=1.0):
        d = np.abs(self.profiles - np.asarray(a, float)).max(axis=(1, 2))
        near = d <= slack * self.spacing * (1 + 1e-9)
        return set(self.labels[near].tolist())


def _local_tau(game, spec, joint, spacing):
    flat = joint.reshape(-1, game.n_players, game.n_dims)
    if spec is None:
        grad = game.dim_first(flat, game.observations(flat))[0]
    else:
        grad = psi_gradient(game, flat, spec)[0]
    step = game.project(flat + grad) - flat
    g = np.linalg.norm(step, axis=-1).max(axis=-1)
    return (2.0 * spacing * g).reshape(joint.shape[:-2])


def _search(game, grid, payoff, spec):
    grid = grid or GridSpec()
    n_joint = float(grid.points) ** (game.n_players * game.n_dims)
    if n_joint > grid.cap:
        raise GridCapError(f"{grid.points}^{game.n_players * game.n_dims} joint points "
                           f"exceed the cap of {grid.cap}")
    grids = [player_grid(game, n, grid.points) for n in range(game.n_players)]
    joint = _joint(grids)
    spacing = grid_spacing(game, grid.points)
    values = payoff(joint)                              # (M_1..M_N, N)
    gain = np.zeros(joint.shape[:-2])
    for n in range(game.n_players):
        u = values[..., n]
        gain = np.maximum(gain, u.max(axis=n, keepdims=True) - u)
    tau = (np.full(gain.shape, grid.tau) if grid.tau is not None
           else _local_tau(game, spec, joint, spacing))
    mask = gain <= tau + 1e-12
    idx = np.nonzero(mask)                             # row-major = lexicographic
    profiles = joint[idx]
    labels = _cluster(profiles, spacing)
    return EquilibriumCells(profiles, gain[idx], labels, spacing, tau[idx])


def _cluster(profiles, spacing):
    if not len(profiles):
        return np.zeros(0, int)
    flat = profiles.reshape(len(profiles), -1)
    d = np.abs(flat[:, None, :] - flat[None, :, :]).max(axis=-1)
    _, labels = connected_components(d <= spacing * (1 + 1e-6), directed=False)
    # relabel so cluster ids follow first appearance
    _, first = np.unique(labels, return_index=True)
    order = np.argsort(first)
    remap = np.empty_like(order)
    remap[order] = np.arange(len(order))
    return remap[labels]


def brute_force_ne(game, grid=None):
    """Grid profiles where no player gains more than the tolerance by a
    unilateral move to another grid point."""
    def payoff(a):
        return game.dim_values(a, game.observations(a)).sum(axis=-1)
    return _search(game, grid, payoff, None)


def brute_force_rne(game, spec, grid=None):
    """As :func:`brute_force_ne`, with worst-case utilities."""
    spec.check(game)
    if spec.is_zero:
        return brute_force_ne(game, grid)
    return _search(game, grid, lambda a: psi_all(game, a, spec), spec)


# ---------------------------------------------------------------------------
# Worst case by sampling the uncertainty sphere
# ---------------------------------------------------------------------------

def sphere_points(k, count=None, seed=0):
    """Unit vectors covering the sphere in ``R^k``."""
    if k == 1:
        return np.array([[1.0], [-1.0]])
    if k == 2:
        t = np.linspace(0, 2 * np.pi, count or 3600, endpoint=False)
        return np.column_stack([np.cos(t), np.sin(t)])
    if k == 3:
        m = count or 20000
        i = np.arange(m) + 0.5
        z = 1 - 2 * i / m
        phi = np.pi * (1 + 5 ** 0.5) * i
        rho = np.sqrt(1 - z ** 2)
        return np.column_stack([rho * np.cos(phi), rho * np.sin(phi), z])
    v = np.random.default_rng(seed).standard_normal((count or 100000, k))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _to_unit(angles, k):
    # hyperspherical coordinates -> unit vector
    out = np.ones(k)
    s = 1.0
    for i, t in enumerate(angles):
        out[i] = s * np.cos(t)
        s *= np.sin(t)
    out[-1] = s
    return out


def _to_angles(u):
    k = len(u)
    ang = np.zeros(k - 1)
    for i in range(k - 1):
        ang[i] = np.arctan2(np.linalg.norm(u[i + 1:]), u[i])
    if u[-1] < 0:
        ang[-1] = 2 * np.pi - ang[-1]
    return ang


def grid_worst_case(game, a, n, radius, count=None, refine=True):
    """Minimise player ``n``'s utility over the sphere of ``radius`` around
    its nominal observation. Returns ``(f_tilde, value)``."""
    a = np.asarray(a, float)
    f = game.observations(a)[n]
    k = game.n_dims
    if radius == 0:
        return f.copy(), float(game.dim_values(a[n], f, n).sum())
    dirs = sphere_points(k, count)
    cand = f + radius * dirs
    with np.errstate(invalid="ignore", divide="ignore"):      # masked just below
        vals = game.dim_values(a[n], cand, n).sum(axis=-1)
    vals = np.where(np.any(game.domain_violation(a[n], cand, n), axis=-1), np.inf, vals)
    best = int(np.argmin(vals))
    f_best, v_best = cand[best], vals[best]
    if refine and k >= 2:
        def obj(ang):
            ft = f + radius * _to_unit(ang, k)
            if np.any(game.domain_violation(a[n], ft, n)):
                return np.inf
            return game.dim_values(a[n], ft, n).sum()
        res = minimize(obj, _to_angles(dirs[best]), method="Nelder-Mead",
                       options={"xatol": 1e-10, "fatol": 1e-13, "maxiter": 4000})
        if res.fun < v_best:
            f_best, v_best = f + radius * _to_unit(res.x, k), res.fun
    return f_best, float(v_best)


def _parameter_worst(game, a, n, eps, count=2000):
    """Per-dimension minimum of player ``n``'s utility under coupling-ratio
    errors with ``||e^k|| <= eps[k]``; the error set is a product over
    dimensions and the utility separates, so each dimension is sampled alone.
    Returns the largest reachable observation and the summed minimum."""
    others = np.delete(a, n, axis=0)                   # (N-1, K)
    f = game.observations(a)[n]
    dirs = sphere_points(max(game.n_players - 1, 1), count)
    if game.n_players - 1 == 1:
        dirs = np.array([[1.0], [-1.0], [0.0]])
    shells = np.linspace(0.0, 1.0, 5)[1:]
    reach = np.concatenate([s * dirs for s in shells]) @ others     # (M, K)
    cand = f + game.xnn[n] * eps * reach
    vals = game.dim_values(a[n], cand, n)
    vals = np.where(game.domain_violation(a[n], cand, n), np.inf, vals)
    return cand.max(axis=0), float(vals.min(axis=0).sum())


def saddle_check(game, spec, n, a_n, f_tilde, profile, points=41, tol=1e-3):
    """Grid check of the saddle property for player ``n``.

    ``profile`` supplies the other players' actions (row ``n`` is replaced by
    ``a_n``). Passes when ``a_n`` is feasible and no grid action beats it by
    more than ``tol`` against ``f_tilde``, and ``f_tilde`` lies in the
    uncertainty set and no sampled point of the set is worse by ``tol``.
    """
    spec.check(game)
    a = np.array(profile, float)
    a_n = np.asarray(a_n, float)
    f_tilde = np.asarray(f_tilde, float)
    if not game.spaces[n].is_feasible(a_n, 1e-9):
        return False
    a[n] = a_n
    u_at = float(game.dim_values(a_n, f_tilde, n).sum())
    acts = player_grid(game, n, points)
    if np.max(game.dim_values(acts, f_tilde, n).sum(axis=-1)) > u_at + tol:
        return False
    f = game.observations(a)[n]
    if spec.mode == "observation":
        r = float(spec.absolute(game, f[None])[n]) if spec.relative else float(spec.radii[n])
        if np.linalg.norm(f_tilde - f) > r * (1 + 1e-9) + 1e-12:
            return False
        shells = np.linspace(0.0, 1.0, 5)[1:]
        cand = np.concatenate([f + s * r * sphere_points(game.n_dims, 2000) for s in shells])
    else:
        eps = spec.absolute(game, None)[n]
        top, worst = _parameter_worst(game, a, n, eps)
        if np.any(f_tilde > top + 1e-9):
            return False
        return bool(u_at <= worst + tol)
    ok = ~np.any(game.domain_violation(a_n, cand, n), axis=-1)
    worst = np.min(game.dim_values(a_n, cand[ok], n).sum(axis=-1))
    return bool(u_at <= worst + tol)


# ---------------------------------------------------------------------------
# Finite differences
# ---------------------------------------------------------------------------

def central_derivative(fun, x, order=1, step=None):
    """Elementwise derivative of a vectorised scalar map by central
    differences with one Richardson extrapolation step."""
    if order not in (1, 2, 3):
        raise ValueError("order must be 1, 2 or 3")
    x = np.asarray(x, float)
    h = step if step is not None else {1: 1e-3, 2: 1e-3, 3: 1e-2}[order] * np.maximum(1.0, np.abs(x))

    def stencil(h):
        if order == 1:
            return (fun(x + h) - fun(x - h)) / (2 * h)
        if order == 2:
            return (fun(x + h) - 2 * fun(x) + fun(x - h)) / h ** 2
        return (fun(x + 2 * h) - 2 * fun(x + h) + 2 * fun(x - h) - fun(x - 2 * h)) / (2 * h ** 3)

    return (4 * stencil(h / 2) - stencil(h)) / 3


def fd_partials(game, a, f, idx, step=None):
    """Per-dimension partials of ``game``'s utility family by central
    differences: ``da, df, daa, daf, dff`` and the mixed third partials."""
    a = np.asarray(a, float)
    f = np.asarray(f, float)
    val = lambda aa, ff: game.dim_values(aa, ff, idx)
    ha = 1e-3 * np.maximum(1.0, np.abs(a))
    hf = 1e-3 * np.maximum(1.0, np.abs(f))
    da = central_derivative(lambda t: val(t, f), a, 1)
    df = central_derivative(lambda t: val(a, t), f, 1)
    daa = central_derivative(lambda t: val(t, f), a, 2)
    dff = central_derivative(lambda t: val(a, t), f, 2)

    def mixed(ff):
        return central_derivative(lambda t: val(t, ff), a, 1, ha)

    daf = central_derivative(mixed, f, 1, hf)
    daaf = central_derivative(lambda ff: central_derivative(lambda t: val(t, ff), a, 2, 10 * ha),
                              f, 1, 10 * hf)
    daff = central_derivative(lambda ff: mixed(ff), f, 2, 10 * hf)
    return {"da": da, "df": df, "daa": daa, "daf": daf, "dff": dff,
            "daaf": daaf, "daff": daff}
