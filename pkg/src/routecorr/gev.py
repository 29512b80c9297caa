"""Closed-form GEV route choice models: MNL, Link-Nested Logit (a cross-nested
logit with one nest per link) and Paired Combinatorial Logit.

All models work on scaled impedances ``C_k / theta0``; the generating
functions are homogeneous of degree one in ``y_k = exp(-C_k / theta0)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .netgraph import ChoiceSet, Network, overlap_impedance

#: Positivity floor applied to every nesting parameter.
EPS_DELTA = 1e-3


class ModelError(ValueError):
    """Malformed model or parameters."""


def theta0_from_cv(cv: float, min_impedance: float) -> float:
    """Gumbel scale giving a standard deviation ``cv * min_impedance``."""
    if not (cv > 0 and min_impedance > 0):
        raise ValueError("cv and min_impedance must be positive")
    return math.sqrt(6.0) * cv * min_impedance / math.pi


@dataclass(frozen=True)
class MnlModel:
    theta0: float
    n_routes: int

    def __post_init__(self):
        if not self.theta0 > 0:
            raise ModelError("theta0 must be positive")


@dataclass(frozen=True)
class CnlModel:
    """Cross-nested logit.

    ``alpha`` has shape (n_nests, n_routes); ``delta`` holds one nesting
    parameter per nest (ratio of nest scale to ``theta0``).
    """

    alpha: np.ndarray
    delta: np.ndarray
    theta0: float
    nest_ids: tuple = field(default=())

    def __post_init__(self):
        alpha = np.asarray(self.alpha, dtype=float)
        delta = np.asarray(self.delta, dtype=float)
        if alpha.ndim != 2 or delta.shape != (alpha.shape[0],):
            raise ModelError("alpha must be (n_nests, n_routes) and delta (n_nests,)")
        if not self.theta0 > 0:
            raise ModelError("theta0 must be positive")
        if np.any(alpha < 0):
            raise ModelError("inclusion coefficients must be nonnegative")
        if np.any(delta <= 0) or np.any(delta > 1):
            raise ModelError("nesting parameters must lie in (0, 1]")
        if np.any(alpha.sum(axis=0) <= 0):
            raise ModelError("every route needs a positive inclusion coefficient in some nest")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "delta", delta)

    @property
    def n_routes(self) -> int:
        return self.alpha.shape[1]


@dataclass(frozen=True)
class PclModel:
    """Paired combinatorial logit with symmetric similarities ``sigma``."""

    sigma: np.ndarray
    theta0: float

    def __post_init__(self):
        sigma = np.asarray(self.sigma, dtype=float)
        n = sigma.shape[0]
        if sigma.shape != (n, n) or n < 2:
            raise ModelError("sigma must be a square matrix over at least two routes")
        if not np.allclose(sigma, sigma.T):
            raise ModelError("sigma must be symmetric")
        off = sigma[~np.eye(n, dtype=bool)]
        if np.any(off < 0) or np.any(off >= 1):
            raise ModelError("similarities must lie in [0, 1)")
        if not self.theta0 > 0:
            raise ModelError("theta0 must be positive")
        sigma = sigma.copy()
        np.fill_diagonal(sigma, 0.0)
        object.__setattr__(self, "sigma", sigma)

    @property
    def n_routes(self) -> int:
        return self.sigma.shape[0]

    def pairs(self):
        n = self.n_routes
        return [(i, j) for i in range(n) for j in range(i + 1, n)]

    def as_cnl(self) -> CnlModel:
        """The same model written as a CNL with one unit-inclusion nest per pair."""
        pairs = self.pairs()
        alpha = np.zeros((len(pairs), self.n_routes))
        delta = np.empty(len(pairs))
        for m, (i, j) in enumerate(pairs):
            alpha[m, i] = alpha[m, j] = 1.0
            delta[m] = 1.0 - self.sigma[i, j]
        return CnlModel(alpha, delta, self.theta0, tuple(pairs))


GevModel = MnlModel | CnlModel | PclModel


# --------------------------------------------------------------------------
# probabilities
# --------------------------------------------------------------------------

def mnl_probabilities(impedances, theta0: float) -> np.ndarray:
    if not theta0 > 0:
        raise ModelError("theta0 must be positive")
    v = -np.asarray(impedances, dtype=float) / theta0
    return np.exp(v - logsumexp(v))


def cnl_probabilities(model: CnlModel, impedances) -> np.ndarray:
    """Cross-nested logit probabilities, evaluated in log space.

    Zero inclusion coefficients contribute nothing (0 ** (1/delta) = 0).
    """
    v = -np.asarray(impedances, dtype=float) / model.theta0
    if v.shape != (model.n_routes,):
        raise ModelError("impedance vector does not match the model")
    with np.errstate(divide="ignore"):
        log_alpha = np.log(model.alpha)
    # per nest and route: (log alpha_kl + V_k) / delta_l
    x = (log_alpha + v[None, :]) / model.delta[:, None]
    log_s = logsumexp(x, axis=1)
    log_t = model.delta * log_s
    if not np.all(np.isfinite(log_t[model.alpha.sum(axis=1) > 0])):
        raise ModelError("malformed model: non-finite nest contribution")
    used = np.isfinite(log_t)
    log_t = np.where(used, log_t, -np.inf)
    upper = np.exp(log_t - logsumexp(log_t[used]))
    lower = np.exp(x - np.where(used, log_s, 0.0)[:, None])
    p = (upper[:, None] * lower).sum(axis=0)
    return p / p.sum()


def pcl_probabilities(model: PclModel, impedances) -> np.ndarray:
    return cnl_probabilities(model.as_cnl(), impedances)


def probabilities(model: GevModel, impedances) -> np.ndarray:
    if isinstance(model, MnlModel):
        return mnl_probabilities(impedances, model.theta0)
    if isinstance(model, PclModel):
        return pcl_probabilities(model, impedances)
    return cnl_probabilities(model, impedances)


# --------------------------------------------------------------------------
# model construction
# --------------------------------------------------------------------------

DELTA_RULES = ("constant", "arithmetic", "geometric")


@dataclass(frozen=True)
class DeltaRule:
    """How LNL nesting parameters are set, plus the lower bound ``dmin``."""

    kind: str = "constant"
    dmin: float = 0.0

    def __post_init__(self):
        if self.kind not in DELTA_RULES:
            raise ModelError(f"unknown delta rule {self.kind!r}")
        if not 0.0 <= self.dmin <= 1.0:
            raise ModelError("dmin must lie in [0, 1]")

    @property
    def floor(self) -> float:
        return max(self.dmin, EPS_DELTA)


def inclusion_matrix(net: Network, choice_set: ChoiceSet) -> tuple[list[str], np.ndarray]:
    """LNL inclusion coefficients alpha_kl = c_l / C_k for links on route k."""
    links = choice_set.links_used()
    pos = {l: i for i, l in enumerate(links)}
    alpha = np.zeros((len(links), len(choice_set)))
    for k, route in enumerate(choice_set.routes):
        for l in route.links:
            alpha[pos[l], k] = net.impedance(l) / route.impedance
    return links, alpha


def lnl_deltas(alpha: np.ndarray, rule: DeltaRule) -> np.ndarray:
    member = alpha > 0
    n_l = member.sum(axis=1)
    if rule.kind == "constant":
        raw = np.zeros(alpha.shape[0])
    elif rule.kind == "arithmetic":
        raw = 1.0 - alpha.sum(axis=1) / n_l
    else:
        with np.errstate(divide="ignore"):
            log_alpha = np.where(member, np.log(alpha), 0.0)
        raw = 1.0 - np.exp(log_alpha.sum(axis=1) / n_l)
    return np.clip(np.maximum(raw, rule.floor), None, 1.0)


def build_lnl(net: Network, choice_set: ChoiceSet, rule: DeltaRule, theta0: float) -> CnlModel:
    links, alpha = inclusion_matrix(net, choice_set)
    return CnlModel(alpha, lnl_deltas(alpha, rule), theta0, tuple(links))


def similarity_matrix(net: Network, choice_set: ChoiceSet) -> np.ndarray:
    routes = choice_set.routes
    n = len(routes)
    sigma = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            shared = overlap_impedance(net, routes[i], routes[j])
            s = shared / (routes[i].impedance + routes[j].impedance - shared)
            if s >= 1.0:
                raise ModelError(f"routes {i} and {j} overlap completely; similarity is 1")
            sigma[i, j] = sigma[j, i] = s
    return sigma


def build_pcl(net: Network, choice_set: ChoiceSet, theta0: float) -> PclModel:
    if len(choice_set) < 2:
        raise ModelError("PCL needs at least two routes")
    return PclModel(similarity_matrix(net, choice_set), theta0)
