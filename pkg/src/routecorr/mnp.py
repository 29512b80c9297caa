"""Multinomial Probit target: overlap-proportional moments and Monte-Carlo choice probabilities."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .netgraph import ChoiceSet, Network, overlap_impedance
from .routegen import iter_normal_draws

DEFAULT_DRAWS = 1_000_000


@dataclass(frozen=True)
class MnpSpec:
    xi: float
    n_draws: int = DEFAULT_DRAWS
    seed: int = 0

    def __post_init__(self):
        if not self.xi > 0:
            raise ValueError(f"xi must be positive, got {self.xi!r}")
        if self.n_draws < 1:
            raise ValueError("n_draws must be >= 1")


@dataclass(frozen=True)
class MnpResult:
    probabilities: np.ndarray
    std_errors: np.ndarray
    counts: np.ndarray
    n_draws: int


def xi_from_cv(cv: float, min_impedance: float) -> float:
    """Probit proportionality constant matching a coefficient of variation
    ``cv`` on the minimum-impedance route."""
    if not (cv > 0 and min_impedance > 0):
        raise ValueError("cv and min_impedance must be positive")
    return cv * cv * min_impedance


def overlap_matrix(net: Network, choice_set: ChoiceSet) -> np.ndarray:
    routes = choice_set.routes
    n = len(routes)
    out = np.empty((n, n))
    for i in range(n):
        out[i, i] = routes[i].impedance
        for j in range(i + 1, n):
            out[i, j] = out[j, i] = overlap_impedance(net, routes[i], routes[j])
    return out


def ds_moments(net: Network, choice_set: ChoiceSet, xi: float) -> tuple[np.ndarray, np.ndarray]:
    """Covariance ``xi * overlap`` and correlation ``overlap / sqrt(C_k C_k')``."""
    if not xi > 0:
        raise ValueError("xi must be positive")
    overlap = overlap_matrix(net, choice_set)
    cov = xi * overlap
    d = np.sqrt(np.diag(overlap))
    corr = overlap / np.outer(d, d)
    np.fill_diagonal(corr, 1.0)
    return cov, corr


def incidence(net: Network, choice_set: ChoiceSet) -> tuple[list[str], np.ndarray]:
    """Links used by the choice set and the (n_links, n_routes) incidence matrix."""
    links = choice_set.links_used()
    pos = {l: i for i, l in enumerate(links)}
    a = np.zeros((len(links), len(choice_set)))
    for k, route in enumerate(choice_set.routes):
        for l in route.links:
            a[pos[l], k] = 1.0
    return links, a


def simulate_mnp_probabilities(net: Network, choice_set: ChoiceSet, spec: MnpSpec) -> MnpResult:
    """Choice frequencies of the minimum perceived-impedance route.

    Perceived link impedances are drawn independently as
    Normal(c_l, xi * c_l) and summed along routes; negative draws are kept.
    Ties go to the lowest route index.
    """
    links, a = incidence(net, choice_set)
    mean = np.array([net.impedance(l) for l in links])
    sd = np.sqrt(spec.xi * mean)
    counts = np.zeros(len(choice_set), dtype=np.int64)
    for block in iter_normal_draws(spec.seed, spec.n_draws, len(links)):
        route_cost = (mean + sd * block) @ a
        counts += np.bincount(route_cost.argmin(axis=1), minlength=len(choice_set))
    p = counts / spec.n_draws
    se = np.sqrt(p * (1.0 - p) / spec.n_draws)
    return MnpResult(p, se, counts, spec.n_draws)


def simulate_route_costs(net: Network, choice_set: ChoiceSet, spec: MnpSpec) -> np.ndarray:
    """Raw simulated route impedances, shape (n_draws, n_routes); for diagnostics."""
    links, a = incidence(net, choice_set)
    mean = np.array([net.impedance(l) for l in links])
    sd = np.sqrt(spec.xi * mean)
    return np.concatenate([(mean + sd * b) @ a for b in iter_normal_draws(spec.seed, spec.n_draws, len(links))])
