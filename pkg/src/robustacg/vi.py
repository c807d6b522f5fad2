"""Variational-inequality diagnostics for additively coupled games.

Builds the curvature matrix whose P-property certifies a unique equilibrium,
the strong-monotonicity constant used by the perturbation bounds, and the
affine VI data that describes log-family games.
"""

from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional

import numpy as np

from .errors import BoundUnavailableError
from .game import _frozen, random_profile

P_MATRIX_MAX_N = 16
MINOR_TOL = 1e-12


def vi_mapping(game, a):
    """``F(a)``: row ``n`` is minus the gradient of ``v_n`` in ``a_n``."""
    a = np.asarray(a, float)
    f = game.observations(a)
    return -game.dim_first(a, f)[0]


# ---------------------------------------------------------------------------
# Curvature matrix
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ViReport:
    upsilon: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    p_matrix: bool
    c_sm: float
    method: str
    distance_bound: Optional[float] = None
    w_norm: Optional[float] = None
    gap_estimate: Optional[float] = None

    def as_dict(self):
        return {
            "upsilon": self.upsilon.tolist(),
            "alpha": self.alpha.tolist(),
            "beta": self.beta.tolist(),
            "p_matrix": self.p_matrix,
            "c_sm": self.c_sm,
            "method": self.method,
            "distance_bound": self.distance_bound,
            "w_norm": self.w_norm,
            "gap_estimate": self.gap_estimate,
        }


def effective_box(game):
    """Per-dimension (min, max) that a feasible action can actually reach."""
    lower, upper, total, ge = game.bounds
    hi = np.where(ge[:, None], upper, np.minimum(upper, total[:, None]))
    rest_hi = upper.sum(axis=1, keepdims=True) - upper
    lo = np.where(ge[:, None], np.maximum(lower, total[:, None] - rest_hi), lower)
    return lo, hi


def _aggregate(game, a_eff):
    # (c + y + sum_{m != n} x_nm a_m) for every n, k at a chosen extreme profile
    return np.einsum("nmk,mk->nk", game._xoff, a_eff) + game.coupling.y


def _closed_form_curvature(game):
    fam = game.family
    n = game.n_players
    lo, hi = effective_box(game)
    if fam.tag == "linear-jackson":
        return np.zeros(n), np.zeros((n, n))
    x_ratio = game._xoff  # x_nm for rate-log; divided by x_nn below for log-theta
    if fam.tag == "rate-log":
        if fam.high_sinr:
            return np.min(1.0 / hi ** 2, axis=1), np.zeros((n, n))
        s_max = _aggregate(game, hi) + hi
        s_min = _aggregate(game, lo) + lo
        alpha = np.min(1.0 / s_max ** 2, axis=1)
        beta = np.max(x_ratio / (s_min ** 2)[:, None, :], axis=2)
        return alpha, beta
    # log-theta: |phi''(z)| decreases in z, so extremes sit at the box extremes
    xnn = game.xnn
    z_max = hi + (fam.c + _aggregate(game, hi)) / xnn
    z_min = lo + (fam.c + _aggregate(game, lo)) / xnn
    curv = lambda z: np.abs(_phi2(z, fam.theta))
    alpha = np.min(curv(z_max), axis=1)
    beta = np.max(curv(z_min)[:, None, :] * x_ratio / xnn[:, None, :], axis=2)
    return alpha, beta


def _phi2(z, theta):
    if theta == 1.0:
        return -1.0 / z ** 2
    return theta * z ** (theta - 1.0)


def _sample_points(game, n_random, seed):
    rng = np.random.default_rng(seed)
    lo, hi = effective_box(game)
    nk = lo.size
    if nk <= 12:
        bits = (np.arange(2 ** nk)[:, None] >> np.arange(nk)) & 1
    else:
        bits = rng.integers(0, 2, size=(4096, nk))
    corners = np.where(bits.reshape(-1, *lo.shape) == 1, hi, lo)
    corners = game.project(corners)
    randoms = np.array([random_profile(game, rng) for _ in range(n_random)])
    return np.concatenate([corners, randoms])


def sampled_curvature(game, n_random=1000, seed=0):
    """Estimate ``alpha_min`` and ``beta_max`` by sampling feasible profiles.

    Uses every box corner (projected onto the feasible set, at most 4096 of
    them) plus ``n_random`` random profiles. This is an approximation: the
    true extremes may sit between samples.
    """
    pts = _sample_points(game, n_random, seed)
    f = game.observations(pts)
    p = game.dim_partials(pts, f)
    alpha = np.min(-p.daa, axis=(0, 2))
    cross = np.abs(p.daf)[:, :, None, :] * game._xoff[None]
    beta = np.max(cross, axis=(0, 3))
    return alpha, beta


def build_upsilon(game, method="auto", n_random=1000, seed=0):
    """Assemble the curvature matrix (diagonal ``alpha``, off-diagonal ``-beta``).

    ``method="auto"`` uses the exact extremes available for the registered
    families; ``"sampled"`` forces the sampling estimate.
    """
    if method == "auto":
        alpha, beta = _closed_form_curvature(game)
        used = "closed-form"
    elif method == "sampled":
        alpha, beta = sampled_curvature(game, n_random, seed)
        used = "sampled"
    else:
        raise ValueError(f"unknown method {method!r}")
    beta = beta.copy()
    np.fill_diagonal(beta, 0.0)
    ups = np.diag(alpha) - beta
    return ViReport(_frozen(ups), _frozen(alpha), _frozen(beta), is_p_matrix(ups),
                    strong_monotonicity_constant(ups), used)


def is_p_matrix(m):
    """True iff every principal minor of ``m`` exceeds ``1e-12``."""
    m = np.asarray(m, float)
    n = m.shape[0]
    if m.shape != (n, n):
        raise ValueError("expected a square matrix")
    if n > P_MATRIX_MAX_N:
        raise ValueError(f"principal-minor enumeration limited to N <= {P_MATRIX_MAX_N}")
    for size in range(1, n + 1):
        for idx in combinations(range(n), size):
            if np.linalg.det(m[np.ix_(idx, idx)]) <= MINOR_TOL:
                return False
    return True


def strong_monotonicity_constant(upsilon):
    """Smallest eigenvalue of the symmetric part, clamped at zero."""
    u = np.asarray(upsilon, float)
    lam = np.linalg.eigvalsh(0.5 * (u + u.T))[0]
    return float(max(lam, 0.0))


def theorem2_distance_bound(delta, c_sm):
    """``||delta||_2 / c_sm``: how far the robust equilibrium can drift."""
    if not c_sm > 0:
        raise BoundUnavailableError("strong-monotonicity constant is zero")
    return float(np.linalg.norm(np.asarray(delta, float)) / c_sm)


def w_matrix(game, a):
    """Per-dimension sensitivity matrices, shape (K, N, N).

    Diagonal entries are ``dv_n^k/da_n^k``; off-diagonal entries are the
    cross effects ``dv_n^k/df_n^k * x_nm^k``.
    """
    a = np.asarray(a, float)
    f = game.observations(a)
    p = game.dim_partials(a, f)
    w = p.df[:, None, :] * game._xoff
    idx = np.arange(game.n_players)
    w[idx, idx, :] = p.da
    return np.moveaxis(w, 2, 0)


def spectral_norms(w):
    """Largest singular value of each matrix in a stack."""
    return np.linalg.norm(w, ord=2, axis=(-2, -1))


def utility_gap_estimate(game, a, delta, c_sm):
    """Estimated social-utility loss: ``max_k ||W^k||_2 * ||delta|| / c_sm``."""
    if np.linalg.norm(delta) == 0:
        return 0.0
    return float(spectral_norms(w_matrix(game, a)).max()
                 * theorem2_distance_bound(delta, c_sm))


def analyze(game, delta=None, a=None, method="auto"):
    """Curvature report plus, when given, the perturbation bound and gap."""
    rep = build_upsilon(game, method)
    extra = {}
    if delta is not None and rep.c_sm > 0:
        extra["distance_bound"] = theorem2_distance_bound(delta, rep.c_sm)
        if a is not None:
            extra["w_norm"] = float(spectral_norms(w_matrix(game, a)).max())
            extra["gap_estimate"] = extra["w_norm"] * extra["distance_bound"]
    return ViReport(**{**rep.__dict__, **extra})


# ---------------------------------------------------------------------------
# Affine VI for the log family
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AviSystem:
    """Affine data ``M_n(a) = w_n + sum_m M_nm a_m`` of a log-family game.

    ``m_max`` has a zero diagonal and ``max_k x_nm/x_nn`` elsewhere.
    ``lambda_min`` is the smallest eigenvalue of the symmetric part of
    ``I - m_max``, the norm-level matrix whose positive definiteness makes
    the block mapping strongly monotone.
    """

    w: np.ndarray
    blocks: np.ndarray
    m_max: np.ndarray
    lambda_min: float
    theta: float
    game: object = field(repr=False, compare=False)

    @property
    def n_players(self):
        return self.w.shape[0]


def build_avi(game):
    if game.family.tag != "log-theta":
        raise ValueError("affine VI form needs the log-theta family")
    xnn = game.xnn
    w = (game.coupling.y + game.family.c) / xnn
    blocks = game.coupling.x / xnn[:, None, :]
    m_max = np.max(game._xoff / xnn[:, None, :], axis=2)
    cert = np.eye(game.n_players) - m_max
    lam = float(np.linalg.eigvalsh(0.5 * (cert + cert.T))[0])
    return AviSystem(_frozen(w), _frozen(blocks), _frozen(m_max), lam,
                     game.family.theta, game)


def avi_mapping(avi, a):
    """Nominal affine mapping evaluated at profile ``a`` (N x K)."""
    return avi.w + np.einsum("nmk,mk->nk", avi.blocks, np.asarray(a, float))


def _max_norms(spaces):
    return np.array([np.linalg.norm(s.max_norm_point()) for s in spaces])


def avi_uniqueness_check(avi, spaces):
    """Small-coupling test: ``||a_n|| > sum_m M_nm ||a_m||`` for every ``n``.

    Norms are taken at each space's largest-norm vertex. Equality fails.
    """
    p = _max_norms(spaces)
    return bool(np.all(p > avi.m_max @ p))


def avi_reversed_check(avi, spaces):
    """Strong-coupling test: ``||a_n|| < sum_m M_nm ||a_m||`` for every ``n``."""
    p = _max_norms(spaces)
    return bool(np.all(p < avi.m_max @ p))


def theorem3_distance_bound(eps, lambda_min):
    """``||E||_2^2 / lambda_min`` with ``E = diag(max_k eps_n^k)``."""
    if not lambda_min > 0:
        raise BoundUnavailableError("minimum eigenvalue is not positive")
    eps = np.atleast_2d(np.asarray(eps, float))
    e_norm = np.max(np.abs(eps)) if eps.size else 0.0
    return float(e_norm ** 2 / lambda_min)
