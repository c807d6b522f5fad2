"""Additively coupled games: strategy sets, observations and utilities.

A game has ``N`` players sharing ``K`` orthogonal dimensions. Player ``n``
picks ``a_n`` in a box with a sum constraint and sees the others only through
the additive observation

    f_n^k = sum_{m != n} x_{nm}^k a_m^k + y_n^k.

Its utility is a sum over dimensions of a per-dimension function of
``(a_n^k, f_n^k)`` drawn from a small closed set of families with analytic
derivatives up to third order.
"""

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .errors import DomainError, InfeasibleSpaceError

FEAS_TOL = 1e-9


def _frozen(arr, dtype=float):
    out = np.array(arr, dtype=dtype)
    out.setflags(write=False)
    return out


# ---------------------------------------------------------------------------
# Strategy spaces and projection
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StrategySpace:
    """Box ``[lower, upper]`` intersected with a sum constraint.

    ``sense="le"`` means ``sum(a) <= total`` (power budgets); ``sense="ge"``
    means ``sum(a) >= total`` (minimum-rate constraints in Jackson networks).
    """

    lower: np.ndarray
    upper: np.ndarray
    total: float
    sense: str = "le"

    def __post_init__(self):
        lower = _frozen(np.atleast_1d(self.lower))
        upper = _frozen(np.atleast_1d(self.upper))
        if lower.shape != upper.shape or lower.ndim != 1:
            raise ValueError("lower and upper must be 1-d arrays of equal length")
        if self.sense not in ("le", "ge"):
            raise ValueError(f"unknown sum sense {self.sense!r}")
        if np.any(lower > upper):
            raise InfeasibleSpaceError("lower bound exceeds upper bound")
        total = float(self.total)
        if self.sense == "le" and lower.sum() > total + FEAS_TOL:
            raise InfeasibleSpaceError("sum of lower bounds exceeds the budget")
        if self.sense == "ge" and upper.sum() < total - FEAS_TOL:
            raise InfeasibleSpaceError("upper bounds cannot reach the minimum sum")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "total", total)

    @classmethod
    def budget(cls, n_dims, total, upper=None, lower=0.0):
        """Power-control style space: ``lower <= a_k <= upper``, ``sum a <= total``."""
        upper = total if upper is None else upper
        return cls(np.full(n_dims, lower, float) if np.isscalar(lower) else lower,
                   np.full(n_dims, upper, float) if np.isscalar(upper) else upper,
                   total, "le")

    @property
    def n_dims(self):
        return self.lower.size

    def is_feasible(self, a, tol=FEAS_TOL):
        a = np.asarray(a, float)
        if a.shape != self.lower.shape:
            return False
        if np.any(a < self.lower - tol) or np.any(a > self.upper + tol):
            return False
        s = a.sum()
        if self.sense == "le":
            return bool(s <= self.total + tol)
        return bool(s >= self.total - tol)

    def max_norm_point(self):
        """Feasible vertex with the largest Euclidean norm.

        Greedy fill of the largest upper bounds; exact when ``lower == 0``.
        """
        if self.sense == "ge" or self.upper.sum() <= self.total:
            return self.upper.copy()
        a = self.lower.copy()
        budget = self.total - a.sum()
        for k in np.argsort(-self.upper, kind="stable"):
            add = min(self.upper[k] - a[k], budget)
            a[k] += add
            budget -= add
            if budget <= 0:
                break
        return a


def _clip_shift(v, lower, upper, mu):
    return np.clip(v - mu[..., None], lower, upper)


def _solve_level(v, lower, upper, total):
    """Multiplier ``mu`` with ``sum(clip(v - mu)) == total``, row by row.

    The clipped sum is piecewise linear and nonincreasing in ``mu`` with
    breakpoints at ``v - upper`` and ``v - lower``. Locate the bracketing pair
    of sorted breakpoints by binary search, then interpolate exactly.
    """
    bp = np.sort(np.concatenate([v - upper, v - lower], axis=-1), axis=-1)
    sums = np.clip(v[..., None, :] - bp[..., :, None],
                   lower[..., None, :], upper[..., None, :]).sum(axis=-1)
    # sums is nonincreasing, so counting entries >= total finds the bracket
    j = np.clip((sums >= total[..., None]).sum(axis=-1) - 1, 0, bp.shape[-1] - 2)
    take = lambda arr, i: np.take_along_axis(arr, i[..., None], axis=-1)[..., 0]
    b0, b1 = take(bp, j), take(bp, j + 1)
    s0, s1 = take(sums, j), take(sums, j + 1)
    drop = s0 - s1
    frac = np.where(drop > 0, (s0 - total) / np.where(drop > 0, drop, 1.0), 0.0)
    return b0 + np.clip(frac, 0.0, 1.0) * (b1 - b0)


def project_rows(v, lower, upper, total, ge, equality=False):
    """Project each row of ``v`` onto its box-plus-sum set.

    Parameters
    ----------
    v, lower, upper : ndarray, shape (..., K)
    total : ndarray, shape (...)
    ge : ndarray of bool, shape (...)
        True where the sum constraint is ``>=``.
    equality : bool
        Project onto the face ``sum == total`` instead of the half-space.
    """
    v = np.asarray(v, float)
    lower = np.broadcast_to(lower, v.shape)
    upper = np.broadcast_to(upper, v.shape)
    total = np.broadcast_to(np.asarray(total, float), v.shape[:-1])
    ge = np.broadcast_to(np.asarray(ge, bool), v.shape[:-1])
    x = np.clip(v, lower, upper)
    s = x.sum(axis=-1)
    if equality:
        need = np.abs(s - total) > 0
    else:
        need = np.where(ge, s < total, s > total)
    if not np.any(need):
        return x
    mu = _solve_level(v[need], lower[need], upper[need], total[need])
    x[need] = _clip_shift(v[need], lower[need], upper[need], mu)
    return x


def project_feasible(space, v):
    """Euclidean projection of ``v`` onto ``space``.

    Clips to the box and, if the sum constraint is then violated, bisects on
    the sum multiplier. Lower-sum spaces use the mirrored search.
    """
    v = np.asarray(v, float)
    if v.shape != space.lower.shape:
        raise ValueError(f"expected a vector of length {space.n_dims}")
    return project_rows(v, space.lower, space.upper, space.total, space.sense == "ge")


# ---------------------------------------------------------------------------
# Coupling and utility families
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CouplingModel:
    """Coupling tensor ``x[n, m, k]`` and ambient offsets ``y[n, k]``."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = _frozen(self.x)
        y = _frozen(self.y)
        if x.ndim != 3 or x.shape[0] != x.shape[1]:
            raise ValueError("coupling tensor must have shape (N, N, K)")
        if y.shape != (x.shape[0], x.shape[2]):
            raise ValueError("offset must have shape (N, K)")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("coupling parameters must be finite")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n_players(self):
        return self.x.shape[0]

    @property
    def n_dims(self):
        return self.x.shape[2]

    @property
    def diagonal(self):
        """``x[n, n, k]`` as an (N, K) array."""
        return np.einsum("nnk->nk", self.x)

    @property
    def off_diagonal(self):
        x = self.x.copy()
        idx = np.arange(self.n_players)
        x[idx, idx, :] = 0.0
        return x


class Partials(NamedTuple):
    """Per-dimension partial derivatives of ``v^k(a, f)``."""

    da: np.ndarray
    df: np.ndarray
    daa: np.ndarray
    daf: np.ndarray
    dff: np.ndarray
    daaf: np.ndarray
    daff: np.ndarray


FAMILY_TAGS = ("rate-log", "log-theta", "linear-jackson")


def _phi(z, theta, order):
    # log for theta == 1, otherwise z**(theta+1)/(theta+1); derivatives by order
    if theta == 1.0:
        if order == 0:
            return np.log(z)
        return (-1.0) ** (order - 1) * _fact(order - 1) / z ** order
    p = theta + 1.0
    if order == 0:
        return z ** p / p
    coef = 1.0
    for j in range(order - 1):
        coef *= theta - j
    return coef * z ** (theta - (order - 1))


def _fact(n):
    out = 1
    for j in range(2, n + 1):
        out *= j
    return out


@dataclass(frozen=True)
class UtilityFamily:
    """One of the registered per-dimension utility shapes.

    rate-log
        ``log(1 + a/f)``; with ``high_sinr`` the approximation ``log(a/f)``.
    log-theta
        ``phi(a + g) - phi(g)`` with ``g = (c + f) / x_nn`` and
        ``phi = log`` for ``theta == 1``, ``z**(theta+1)/(theta+1)`` for
        ``-1 < theta < 0`` or ``theta < -1``. Best responses water-fill on
        ``g`` for every ``theta``.
    linear-jackson
        ``mu - x_nn a - f`` (residual service capacity of a queue).
    """

    tag: str
    theta: float = 1.0
    c: Optional[np.ndarray] = None
    mu: Optional[np.ndarray] = None
    high_sinr: bool = False

    def __post_init__(self):
        if self.tag not in FAMILY_TAGS:
            raise ValueError(f"unknown utility family {self.tag!r}")
        if self.tag == "log-theta":
            th = float(self.theta)
            if not (th == 1.0 or -1.0 < th < 0.0 or th < -1.0):
                raise ValueError("theta must be 1, in (-1, 0) or below -1")
            object.__setattr__(self, "theta", th)
            if self.c is None:
                raise ValueError("log-theta needs per-dimension constants c")
            object.__setattr__(self, "c", _frozen(self.c))
        if self.tag == "linear-jackson":
            if self.mu is None:
                raise ValueError("linear-jackson needs service rates mu")
            object.__setattr__(self, "mu", _frozen(self.mu))

    @classmethod
    def rate_log(cls, high_sinr=False):
        return cls("rate-log", high_sinr=high_sinr)

    @classmethod
    def log_theta(cls, theta, c):
        return cls("log-theta", theta=theta, c=c)

    @classmethod
    def linear_jackson(cls, mu):
        return cls("linear-jackson", mu=mu)

    @property
    def a1_waived(self):
        # the Jackson utility decreases in the own action as tabulated
        return self.tag == "linear-jackson"

    def check_shapes(self, n_players, n_dims):
        for name in ("c", "mu"):
            arr = getattr(self, name)
            if arr is not None and arr.shape != (n_players, n_dims):
                raise ValueError(f"{name} must have shape ({n_players}, {n_dims})")

    # -- evaluation ---------------------------------------------------------

    def _g(self, f, idx, xnn):
        return (self.c[idx] + f) / xnn

    def domain_violation(self, a, f, idx, xnn):
        """Boolean mask of entries outside the family's domain."""
        if self.tag == "rate-log":
            if self.high_sinr:
                return (f <= 0) | (a <= 0)
            return (f <= 0) | (a + f <= 0)
        if self.tag == "log-theta":
            g = self._g(f, idx, xnn)
            return (g <= 0) | (a + g <= 0)
        return np.zeros(np.broadcast(a, f).shape, bool)

    def values(self, a, f, idx, xnn):
        if self.tag == "rate-log":
            if self.high_sinr:
                return np.log(a) - np.log(f)
            return np.log1p(a / f)
        if self.tag == "log-theta":
            g = self._g(f, idx, xnn)
            return _phi(a + g, self.theta, 0) - _phi(g, self.theta, 0)
        return self.mu[idx] - xnn * a - f

    def first(self, a, f, idx, xnn):
        """Only ``(da, df)``; cheaper than :meth:`partials` in inner loops."""
        if self.tag == "rate-log":
            if self.high_sinr:
                return 1 / a, -1 / f + 0 * a
            inv = 1 / (a + f)
            return inv, inv - 1 / f
        if self.tag == "log-theta":
            g = self._g(f, idx, xnn)
            d1z = _phi(a + g, self.theta, 1)
            return d1z, (d1z - _phi(g, self.theta, 1)) / xnn
        shape = np.broadcast(a, f).shape
        return np.broadcast_to(-xnn, shape), np.full(shape, -1.0)

    def partials(self, a, f, idx, xnn):
        a, f = np.broadcast_arrays(np.asarray(a, float), np.asarray(f, float))
        if self.tag == "rate-log":
            if self.high_sinr:
                zero = np.zeros_like(a)
                return Partials(1 / a, -1 / f, -1 / a ** 2, zero, 1 / f ** 2, zero, zero)
            s = a + f
            inv = 1 / s
            return Partials(inv, inv - 1 / f, -inv ** 2, -inv ** 2,
                            1 / f ** 2 - inv ** 2, 2 * inv ** 3, 2 * inv ** 3)
        if self.tag == "log-theta":
            th = self.theta
            g = self._g(f, idx, xnn)
            z = a + g
            d1z, d1g = _phi(z, th, 1), _phi(g, th, 1)
            d2z, d2g = _phi(z, th, 2), _phi(g, th, 2)
            d3z = _phi(z, th, 3)
            return Partials(d1z, (d1z - d1g) / xnn, d2z, d2z / xnn,
                            (d2z - d2g) / xnn ** 2, d3z / xnn, d3z / xnn ** 2)
        zero = np.zeros_like(a)
        return Partials(np.broadcast_to(-xnn, a.shape).copy(), np.full_like(a, -1.0),
                        zero, zero, zero, zero, zero)


# ---------------------------------------------------------------------------
# Game instance and profiles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GameInstance:
    """Players, strategy spaces, coupling and a utility family."""

    spaces: tuple
    coupling: CouplingModel
    family: UtilityFamily
    check_assumptions: bool = field(default=True, compare=False)

    def __post_init__(self):
        spaces = tuple(self.spaces)
        object.__setattr__(self, "spaces", spaces)
        n, k = self.coupling.n_players, self.coupling.n_dims
        if len(spaces) != n:
            raise ValueError(f"expected {n} strategy spaces, got {len(spaces)}")
        if any(s.n_dims != k for s in spaces):
            raise ValueError(f"every strategy space must have {k} dimensions")
        self.family.check_shapes(n, k)
        xnn = self.coupling.diagonal
        if self.family.tag == "log-theta" and np.any(xnn <= 0):
            raise ValueError("log-theta needs positive x_nn")
        object.__setattr__(self, "_xnn", _frozen(xnn))
        object.__setattr__(self, "_xoff", _frozen(self.coupling.off_diagonal))
        object.__setattr__(self, "_lower", _frozen([s.lower for s in spaces]))
        object.__setattr__(self, "_upper", _frozen([s.upper for s in spaces]))
        object.__setattr__(self, "_total", _frozen([s.total for s in spaces]))
        object.__setattr__(self, "_ge", _frozen([s.sense == "ge" for s in spaces], bool))
        if self.check_assumptions:
            check_assumptions(self)

    @property
    def n_players(self):
        return self.coupling.n_players

    @property
    def n_dims(self):
        return self.coupling.n_dims

    @property
    def xnn(self):
        return self._xnn

    @property
    def bounds(self):
        """Stacked ``(lower, upper, total, ge)`` arrays for batched projection."""
        return self._lower, self._upper, self._total, self._ge

    def with_family(self, family):
        return GameInstance(self.spaces, self.coupling, family, self.check_assumptions)

    # batched helpers; idx selects rows of the per-player constants
    def dim_values(self, a, f, idx=slice(None)):
        return self.family.values(a, f, idx, self._xnn[idx])

    def dim_first(self, a, f, idx=slice(None)):
        return self.family.first(a, f, idx, self._xnn[idx])

    def dim_partials(self, a, f, idx=slice(None)):
        return self.family.partials(a, f, idx, self._xnn[idx])

    def domain_violation(self, a, f, idx=slice(None)):
        return self.family.domain_violation(a, f, idx, self._xnn[idx])

    def observations(self, a):
        """All observations at once: ``f[n, k]`` (batched over leading axes)."""
        a = np.asarray(a, float)
        return np.einsum("nmk,...mk->...nk", self._xoff, a) + self.coupling.y

    def project(self, a, equality=False):
        """Project every row of an (N, K) array onto its player's space."""
        return project_rows(a, self._lower, self._upper, self._total, self._ge, equality)

    def is_feasible(self, a, tol=FEAS_TOL):
        a = np.asarray(a, float)
        return a.shape == (self.n_players, self.n_dims) and all(
            s.is_feasible(row, tol) for s, row in zip(self.spaces, a))


@dataclass(frozen=True)
class StrategyProfile:
    """An N x K action matrix together with its feasibility flag."""

    actions: np.ndarray
    feasible: bool

    @classmethod
    def of(cls, game, actions):
        actions = _frozen(actions)
        return cls(actions, game.is_feasible(actions))

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.actions, dtype=dtype)


def _player(game, n):
    if not 0 <= n < game.n_players:
        raise IndexError(f"player index {n} out of range for {game.n_players} players")


def observation(game, a, n):
    """Observation vector ``f_n`` of player ``n`` at profile ``a``."""
    _player(game, n)
    a = np.asarray(a, float)
    return np.einsum("mk,mk->k", game._xoff[n], a) + game.coupling.y[n]


def _check_domain(game, a_n, f_n, n):
    bad = game.domain_violation(a_n, f_n, n)
    if np.any(bad):
        k = int(np.flatnonzero(bad)[0])
        raise DomainError(f"player {n}: utility undefined in dimension {k} "
                          f"(a={a_n[k]:.6g}, f={f_n[k]:.6g})", dimension=k)


def utility(game, a, n):
    """Utility ``v_n`` of player ``n``: sum of the per-dimension values."""
    a = np.asarray(a, float)
    f_n = observation(game, a, n)
    _check_domain(game, a[n], f_n, n)
    return float(game.dim_values(a[n], f_n, n).sum())


def utilities(game, a):
    """Vector of all players' utilities."""
    a = np.asarray(a, float)
    f = game.observations(a)
    if np.any(game.domain_violation(a, f)):
        for n in range(game.n_players):
            _check_domain(game, a[n], f[n], n)
    return game.dim_values(a, f).sum(axis=-1)


def utility_gradients(game, a, n):
    """Analytic per-dimension partials of ``v_n`` at profile ``a``.

    ``da`` is the gradient in ``a_n``, ``df`` the gradient in ``f_n``; the
    remaining fields give the mixed and third partials used by the
    convergence preconditions.
    """
    a = np.asarray(a, float)
    f_n = observation(game, a, n)
    _check_domain(game, a[n], f_n, n)
    return game.dim_partials(a[n], f_n, n)


def random_profile(game, rng, interior=False):
    """A random feasible profile (strictly inside the box when ``interior``)."""
    lower, upper, total, ge = game.bounds
    width = upper - lower
    if interior:
        lo, hi = lower + 0.05 * width, upper - 0.05 * width
    else:
        lo, hi = lower, upper
    a = lo + rng.random(lower.shape) * (hi - lo)
    # scale the draw into the sum constraint without leaving the shrunken box
    s = a.sum(axis=1)
    for n in range(game.n_players):
        if not ge[n] and s[n] > total[n]:
            base = lo[n]
            room = total[n] - base.sum()
            if interior:
                room *= 0.95
            a[n] = base + (a[n] - base) * max(room, 0.0) / (s[n] - base.sum())
        elif ge[n] and s[n] < total[n]:
            a[n] = game.spaces[n].lower + np.clip(
                (a[n] - game.spaces[n].lower) * total[n] / max(s[n], 1e-300), 0, None)
            a[n] = project_feasible(game.spaces[n], a[n])
    return a


def check_assumptions(game, n_points=8, step=1e-5, seed=0):
    """Finite-difference spot checks that utilities are increasing and concave
    in the own action and decreasing and convex in the observation.

    Raises ``ValueError`` on violation. The own-action check is skipped for
    families that waive it.
    """
    rng = np.random.default_rng(seed)
    for _ in range(n_points):
        a = random_profile(game, rng, interior=True)
        f = game.observations(a)
        if np.any(game.domain_violation(a, f)):
            continue
        v0 = game.dim_values(a, f)
        scale = 1e-9 * (1.0 + np.abs(v0))
        if not game.family.a1_waived:
            v1 = game.dim_values(a + step, f)
            v2 = game.dim_values(a + 2 * step, f)
            if np.any(v1 - v0 <= 0):
                raise ValueError("utility is not increasing in the own action")
            if np.any(v2 - 2 * v1 + v0 > scale):
                raise ValueError("utility is not concave in the own action")
        w1 = game.dim_values(a, f + step)
        w2 = game.dim_values(a, f + 2 * step)
        if np.any(w1 - v0 >= 0):
            raise ValueError("utility is not decreasing in the observation")
        if np.any(w2 - 2 * w1 + v0 < -scale):
            raise ValueError("utility is not convex in the observation")
