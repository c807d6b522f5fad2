"""Concrete games: power control over parallel interference channels and
multi-class Jackson networks of M/M/1 queues, with seeded generators.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import InstabilityError
from .game import CouplingModel, GameInstance, StrategySpace, UtilityFamily, _frozen

SCENARIO_VERSION = 1
STABILITY_MARGIN = 1e-6

# regime -> (band for normalised cross gains, normalised noise level)
POWER_REGIMES = {
    "unique": ((1e-4, 0.01), 1.0),
    "multi": ((0.5, 5.0), 0.1),
    "moderate": ((0.8, 1.25), 0.1),
    "high": ((5.0, 50.0), 0.1),
}


def _rng(seed, index):
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


# ---------------------------------------------------------------------------
# Power control
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PowerControlScenario:
    """Direct gains ``h_direct[n, k]``, cross gains ``h_cross[n, m, k]`` (from
    transmitter ``m`` into receiver ``n``), noise powers and power budgets."""

    h_direct: np.ndarray
    h_cross: np.ndarray
    noise: np.ndarray
    budget: np.ndarray
    cap: np.ndarray
    regime: str = "custom"
    seed: int = 0
    index: int = 0

    def __post_init__(self):
        for name in ("h_direct", "h_cross", "noise", "budget", "cap"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        n, k = self.h_direct.shape
        if self.h_cross.shape != (n, n, k) or self.noise.shape != (n, k):
            raise ValueError("inconsistent gain / noise shapes")
        if self.budget.shape != (n,) or self.cap.shape != (n, k):
            raise ValueError("inconsistent budget shapes")
        off = ~np.eye(n, dtype=bool)
        if np.any(self.h_direct <= 0) or np.any(self.h_cross[off] <= 0) or np.any(self.noise <= 0):
            raise ValueError("gains and noise powers must be positive")

    @property
    def n_players(self):
        return self.h_direct.shape[0]

    @property
    def n_dims(self):
        return self.h_direct.shape[1]

    @property
    def h_bar(self):
        """Cross gains normalised by the receiver's direct gain; zero diagonal."""
        hb = self.h_cross / self.h_direct[:, None, :]
        idx = np.arange(self.n_players)
        hb[idx, idx, :] = 0.0
        return hb

    @property
    def sigma_bar(self):
        return self.noise / self.h_direct

    def with_cross_scale(self, factor):
        """Same scenario with every cross gain multiplied by ``factor``."""
        return PowerControlScenario(self.h_direct, self.h_cross * factor, self.noise,
                                    self.budget, self.cap, self.regime, self.seed, self.index)

    def to_dict(self):
        return {"version": SCENARIO_VERSION, "kind": "power",
                "h_direct": self.h_direct.tolist(), "h_cross": self.h_cross.tolist(),
                "noise": self.noise.tolist(), "budget": self.budget.tolist(),
                "cap": self.cap.tolist(), "regime": self.regime,
                "seed": self.seed, "index": self.index}


def power_scenario(n, k, regime="unique", seed=0, index=0, budget=1.0, band=None, noise=None):
    """Seeded Rayleigh draw placed in a cross-gain regime.

    Direct and cross gains are squared magnitudes of standard complex
    normals. The ratio ``|g_nm|^2 / |g_nn|^2`` is squashed monotonically into
    the regime's band, so ``h_bar`` always lies strictly inside it. The noise
    is set so that each user's normalised noise is the same on every
    sub-channel (level jittered by +-20% across users).
    """
    (lo, hi), level = POWER_REGIMES.get(regime, ((None, None), None))
    if band is not None:
        lo, hi = band
    if noise is not None:
        level = noise
    if lo is None or level is None:
        raise ValueError(f"unknown regime {regime!r}; pass band and noise explicitly")
    rng = _rng(seed, index)
    g = lambda *shape: np.abs(rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) ** 2 / 2
    direct = g(n, k)
    raw = g(n, n, k) / direct[:, None, :]
    h_bar = lo + (hi - lo) * raw / (1.0 + raw)
    cross = h_bar * direct[:, None, :]
    idx = np.arange(n)
    cross[idx, idx, :] = direct
    sigma_bar = level * rng.uniform(0.8, 1.2, size=(n, 1))
    noise_pow = sigma_bar * direct
    budgets = np.full(n, float(budget))
    return PowerControlScenario(direct, cross, noise_pow, budgets,
                                np.repeat(budgets[:, None], k, axis=1), regime, seed, index)


def make_power_game(scenario, high_sinr=False, floor=1e-3):
    """Rate game: ``x = h_bar`` (unit diagonal), ``y = sigma_bar``.

    ``high_sinr`` switches to ``log(a/f)``, whose mixed third partials vanish;
    its actions need a small positive floor (``floor`` times the cap).
    """
    n, k = scenario.n_players, scenario.n_dims
    x = scenario.h_bar
    idx = np.arange(n)
    x[idx, idx, :] = 1.0
    lower = scenario.cap * floor if high_sinr else np.zeros((n, k))
    spaces = tuple(StrategySpace(lower[i], scenario.cap[i], scenario.budget[i], "le")
                   for i in range(n))
    return GameInstance(spaces, CouplingModel(x, scenario.sigma_bar),
                        UtilityFamily.rate_log(high_sinr=high_sinr))


def make_log_theta_game(scenario, theta=1.0, c=None):
    """Power scenario recast in the log-theta family.

    With ``theta = 1`` and ``c = 0`` this is the rate game written as
    ``log(a + f) - log(f)``; other ``theta`` values swap the log for a power
    law while keeping the same coupling and budgets.
    """
    n, k = scenario.n_players, scenario.n_dims
    x = scenario.h_bar
    idx = np.arange(n)
    x[idx, idx, :] = 1.0
    c = np.zeros((n, k)) if c is None else np.broadcast_to(np.asarray(c, float), (n, k))
    spaces = tuple(StrategySpace(np.zeros(k), scenario.cap[i], scenario.budget[i], "le")
                   for i in range(n))
    return GameInstance(spaces, CouplingModel(x, scenario.sigma_bar),
                        UtilityFamily.log_theta(theta, c))


def power_uniqueness_condition(scenario):
    """Closed-form sufficient test: for every user, the smallest own curvature
    exceeds the summed largest cross curvatures (zero lower bounds)."""
    hb, sb = scenario.h_bar, scenario.sigma_bar
    amax = np.minimum(scenario.cap, scenario.budget[:, None])
    load = sb + amax + np.einsum("nmk,mk->nk", hb, amax)
    own = np.min(1.0 / load ** 2, axis=1)
    cross = np.max(hb / sb[:, None, :] ** 2, axis=2).sum(axis=1)
    return bool(np.all(own > cross))


# ---------------------------------------------------------------------------
# Jackson networks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class JacksonScenario:
    """Routing ``routing[k, n, m]`` = probability that a class-``k`` packet
    leaving node ``m`` goes to node ``n``; service rates ``mu[n, k]`` and
    minimum total input rates ``psi_min[n]``."""

    routing: np.ndarray
    mu: np.ndarray
    psi_min: np.ndarray
    seed: int = 0
    index: int = 0
    nu: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        for name in ("routing", "mu", "psi_min"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        k, n, _ = self.routing.shape
        if self.routing.shape != (k, n, n) or self.mu.shape != (n, k) or self.psi_min.shape != (n,):
            raise ValueError("inconsistent Jackson scenario shapes")
        if np.any(self.routing < 0):
            raise ValueError("routing probabilities must be nonnegative")
        if np.any(self.routing.sum(axis=1) > 1 + 1e-12):
            raise ValueError("routing columns must sum to at most one")
        radius = max(np.abs(np.linalg.eigvals(r)).max() for r in self.routing)
        if radius >= 1:
            raise ValueError("routing matrix spectral radius must be below one")
        theta = np.linalg.inv(np.eye(n)[None] - self.routing)
        object.__setattr__(self, "nu", _frozen(np.moveaxis(theta, 0, 2)))

    @property
    def n_nodes(self):
        return self.mu.shape[0]

    @property
    def n_classes(self):
        return self.mu.shape[1]

    @property
    def exit_probability(self):
        """``r_m0^k = 1 - sum_n r_nm^k`` as a (K, N) array."""
        return 1.0 - self.routing.sum(axis=1)

    def theta(self, k):
        """``(I - R^k)^{-1}``."""
        return np.array(self.nu[:, :, k])

    def to_dict(self):
        return {"version": SCENARIO_VERSION, "kind": "jackson",
                "routing": self.routing.tolist(), "mu": self.mu.tolist(),
                "psi_min": self.psi_min.tolist(), "seed": self.seed, "index": self.index}


def jackson_scenario(n=5, k=3, routing_total=0.5, seed=0, index=0,
                     mu_range=(2.0, 5.0), psi_range=(0.1, 0.5)):
    """Random routing whose every column sums to ``routing_total``.

    Entries are uniform draws (zero diagonal) rescaled per column, so every
    node forwards exactly ``routing_total`` of its class traffic and drops
    the rest.
    """
    if not 0 <= routing_total < 1:
        raise ValueError("routing_total must lie in [0, 1)")
    rng = _rng(seed, index)
    raw = rng.uniform(size=(k, n, n))
    raw[:, np.arange(n), np.arange(n)] = 0.0
    routing = raw / raw.sum(axis=1, keepdims=True) * routing_total if n > 1 else raw * 0
    mu = rng.uniform(*mu_range, size=(n, k))
    psi_min = rng.uniform(*psi_range, size=n)
    return JacksonScenario(routing, mu, psi_min, seed, index)


def make_jackson_game(scenario):
    """Residual-capacity game with lower-sum rate constraints.

    ``x = nu`` (including ``nu_nn`` on the diagonal), ``y = 0``; each class
    rate lies in ``[0, psi_min]`` and the total must reach ``psi_min``.
    """
    n, k = scenario.n_nodes, scenario.n_classes
    spaces = tuple(StrategySpace(np.zeros(k), np.full(k, scenario.psi_min[i]),
                                 scenario.psi_min[i], "ge") for i in range(n))
    return GameInstance(spaces, CouplingModel(scenario.nu, np.zeros((n, k))),
                        UtilityFamily.linear_jackson(scenario.mu))


def node_loads(scenario, psi):
    """``sum_m nu_nm^k psi_m^k`` for every node and class."""
    return np.einsum("nmk,mk->nk", scenario.nu, np.asarray(psi, float))


def total_delay(scenario, psi, extra_load=None):
    """Total M/M/1 delay ``sum_n sum_k 1 / (mu - load)``.

    ``extra_load`` (N, K) is added to the loads, e.g. an observation error.
    Raises ``InstabilityError`` naming the node and class when a queue is
    within ``1e-6`` of (or beyond) its stability limit.
    """
    residual = scenario.mu - node_loads(scenario, psi)
    if extra_load is not None:
        residual = residual - extra_load
    bad = residual <= STABILITY_MARGIN
    if np.any(bad):
        node, cls = map(int, np.argwhere(bad)[0])
        raise InstabilityError(f"queue at node {node}, class {cls} is unstable "
                               f"(residual capacity {residual[node, cls]:.3g})",
                               dimension=cls, node=node)
    return float(np.sum(1.0 / residual))


# ---------------------------------------------------------------------------
# Batches and serialisation
# ---------------------------------------------------------------------------

def generate_scenarios(kind, params, seed):
    """``params["count"]`` scenarios; scenario ``i`` depends only on ``(seed, i)``."""
    params = dict(params)
    count = int(params.pop("count", 1))
    make = {"power": power_scenario, "jackson": jackson_scenario}.get(kind)
    if make is None:
        raise ValueError(f"unknown scenario kind {kind!r}")
    return [make(seed=seed, index=i, **params) for i in range(count)]


def scenario_from_dict(d):
    if "version" not in d:
        raise ValueError("scenario file is missing its version field")
    if d["version"] != SCENARIO_VERSION:
        raise ValueError(f"unsupported scenario version {d['version']}")
    kind = d.get("kind")
    if kind == "power":
        return PowerControlScenario(np.array(d["h_direct"]), np.array(d["h_cross"]),
                                    np.array(d["noise"]), np.array(d["budget"]),
                                    np.array(d["cap"]), d.get("regime", "custom"),
                                    d.get("seed", 0), d.get("index", 0))
    if kind == "jackson":
        return JacksonScenario(np.array(d["routing"]), np.array(d["mu"]),
                               np.array(d["psi_min"]), d.get("seed", 0), d.get("index", 0))
    raise ValueError(f"unknown scenario kind {kind!r}")


def save_scenario(scenario, path):
    with open(path, "w") as fh:
        json.dump(scenario.to_dict(), fh, indent=1)


def load_scenario(path):
    with open(path) as fh:
        return scenario_from_dict(json.load(fh))


def make_game(scenario, **kwargs):
    if isinstance(scenario, PowerControlScenario):
        return make_power_game(scenario, **kwargs)
    return make_jackson_game(scenario)
