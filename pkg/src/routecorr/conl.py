"""Combination of Nested Logit (CoNL): a convex mixture of nested-logit
kernels whose nests are the shared links of the choice set.

Construction:

1. ``shared_links`` lists the links used by two or more routes.
2. ``build_mixing_structure`` partitions the routes once per mixing
   component (link nests plus singletons) so that every shared link is a nest
   somewhere.
3. ``component_weights`` gives the mixing weights.
4. ``nesting_deltas`` picks per-link nesting parameters so that the mixture
   reproduces the overlap correlations ``c_l / C_min`` link by link.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .gev import EPS_DELTA, CnlModel, ModelError, cnl_probabilities
from .netgraph import ChoiceSet, Network, natural_key

WEIGHT_VARIANTS = (24, 25, 26, 27)


@dataclass(frozen=True)
class Nest:
    """A link nest (``link`` set, at least two routes) or a singleton (``link`` None)."""

    link: str | None
    routes: tuple[int, ...]


@dataclass(frozen=True)
class MixingComponent:
    index: int
    nests: tuple[Nest, ...]

    @property
    def link_nests(self) -> tuple[Nest, ...]:
        return tuple(n for n in self.nests if n.link is not None)

    @property
    def is_nested(self) -> bool:
        """True for a genuine NL kernel; False when every nest is a singleton (an MNL)."""
        return bool(self.link_nests)

    def nest_of(self, route: int) -> Nest:
        for nest in self.nests:
            if route in nest.routes:
                return nest
        raise KeyError(route)


@dataclass(frozen=True)
class SharedLink:
    link: str
    impedance: float
    routes: frozenset[int]


def shared_links(net: Network, choice_set: ChoiceSet) -> list[SharedLink]:
    """Links used by at least two routes, by descending impedance then link id."""
    members: dict[str, set[int]] = {}
    for k, route in enumerate(choice_set.routes):
        for l in route.links:
            members.setdefault(l, set()).add(k)
    out = [SharedLink(l, net.impedance(l), frozenset(ks)) for l, ks in members.items() if len(ks) >= 2]
    out.sort(key=lambda s: (-s.impedance, natural_key(s.link)))
    return out


def _component(index: int, nests: list[SharedLink], n_routes: int) -> MixingComponent:
    covered = set().union(*(s.routes for s in nests)) if nests else set()
    parts = [Nest(s.link, tuple(sorted(s.routes))) for s in nests]
    parts += [Nest(None, (k,)) for k in range(n_routes) if k not in covered]
    return MixingComponent(index, tuple(parts))


def build_mixing_structure(net: Network, choice_set: ChoiceSet) -> list[MixingComponent]:
    """Greedy colouring of the shared-link conflict graph, then densification.

    Two shared links conflict when some route uses both; they can then not be
    nests of the same component. Links are coloured in ``shared_links`` order
    with the smallest colour free of conflicts. Each colour class seeds a
    component, which is then densified by adding every other shared link that
    conflicts with none of its nests. Routes left over become singletons.
    """
    n = len(choice_set)
    links = shared_links(net, choice_set)
    if not links:
        return [_component(0, [], n)]

    colour: list[int] = []
    for i, s in enumerate(links):
        taken = {colour[j] for j in range(i) if links[j].routes & s.routes}
        colour.append(next(c for c in range(len(links)) if c not in taken))

    components = []
    for c in range(max(colour) + 1):
        chosen = [s for s, col in zip(links, colour) if col == c]
        for s in links:
            if s not in chosen and not any(s.routes & t.routes for t in chosen):
                chosen.append(s)
        chosen.sort(key=links.index)
        components.append(_component(c, chosen, n))
    return components


def validate_structure(components: list[MixingComponent], net: Network, choice_set: ChoiceSet) -> None:
    """Raise ModelError unless every component partitions the choice set into
    valid nests and every shared link is a nest somewhere."""
    n = len(choice_set)
    links = {s.link: s for s in shared_links(net, choice_set)}
    covered = set()
    for comp in components:
        seen: list[int] = [k for nest in comp.nests for k in nest.routes]
        if sorted(seen) != list(range(n)):
            raise ModelError(f"component {comp.index}: nests do not partition the choice set")
        for nest in comp.link_nests:
            s = links.get(nest.link)
            if s is None or set(nest.routes) != set(s.routes):
                raise ModelError(f"component {comp.index}: nest {nest.link!r} is not the full set of routes using it")
            covered.add(nest.link)
        for nest in comp.nests:
            if nest.link is None and len(nest.routes) != 1:
                raise ModelError(f"component {comp.index}: unlabelled nest with several routes")
    missing = set(links) - covered
    if missing:
        raise ModelError(f"shared links not covered by any component: {sorted(missing, key=natural_key)}")


def link_occurrences(components: list[MixingComponent]) -> dict[str, list[int]]:
    """For each link nest, the indices of the components holding it."""
    occ: dict[str, list[int]] = {}
    for i, comp in enumerate(components):
        for nest in comp.link_nests:
            occ.setdefault(nest.link, []).append(i)
    return occ


def component_weights(components: list[MixingComponent], net: Network, variant: int = 24, gamma: float = 1.0) -> np.ndarray:
    """Mixing weights ``w_i`` proportional to ``e_i * f(c_i) ** gamma``.

    ``e_i`` is 1 for components with at least one link nest. ``f`` is
    computed over the component's link nests, for each variant:

    - 24: mean of ``c_l``
    - 25: mean of ``c_l / n_l``
    - 26: min of ``c_l / n_l``
    - 27: max of ``c_l / n_l``

    ``n_l`` is the number of components in which link ``l`` is a nest.
    """
    if variant not in WEIGHT_VARIANTS:
        raise ModelError(f"unknown weight variant {variant!r}; choose from {WEIGHT_VARIANTS}")
    occ = link_occurrences(components)
    raw = np.zeros(len(components))
    for i, comp in enumerate(components):
        if not comp.is_nested:
            continue
        c = np.array([net.impedance(n.link) for n in comp.link_nests])
        per = c / np.array([len(occ[n.link]) for n in comp.link_nests])
        f = {24: c.mean(), 25: per.mean(), 26: per.min(), 27: per.max()}[variant]
        raw[i] = f ** gamma
    total = raw.sum()
    if not total > 0:
        raise ModelError("no nested mixing component: weights are undefined")
    return raw / total


@dataclass(frozen=True)
class DeltaTarget:
    """Per shared link: nesting parameter, weight mass, residual and whether the
    value is the unconstrained solution of the targeting equation."""

    link: str
    delta: float
    weight_mass: float
    residual: float
    unclamped: bool


def nesting_deltas(components, weights, net: Network, choice_set: ChoiceSet, dmin: float = 0.0) -> list[DeltaTarget]:
    """Nesting parameter per shared link from ``(1 - d^2) * W_l = c_l / C_min``,
    bounded below by ``dmin`` (and by ``EPS_DELTA``)."""
    if not 0.0 <= dmin <= 1.0:
        raise ModelError("dmin must lie in [0, 1]")
    c_min = choice_set.min_impedance
    occ = link_occurrences(components)
    floor = max(dmin, EPS_DELTA)
    out = []
    for s in shared_links(net, choice_set):
        mass = float(sum(weights[i] for i in occ.get(s.link, ())))
        if not mass > 0:
            raise ModelError(f"shared link {s.link!r} carries no mixing weight")
        t = 1.0 - s.impedance / (c_min * mass)
        root = math.sqrt(t) if t > 0 else 0.0
        delta = min(1.0, max(floor, root))
        unclamped = t > 0 and root >= floor
        residual = (1.0 - delta * delta) * mass - s.impedance / c_min
        out.append(DeltaTarget(s.link, delta, mass, residual, unclamped))
    return out


@dataclass(frozen=True)
class ConlModel:
    components: tuple[MixingComponent, ...]
    weights: np.ndarray
    deltas: dict
    theta0: float
    n_routes: int
    targets: tuple[DeltaTarget, ...] = ()

    def __post_init__(self):
        if len(self.weights) != len(self.components):
            raise ModelError("one weight per mixing component required")
        if np.any(np.asarray(self.weights) < 0) or abs(float(np.sum(self.weights)) - 1.0) > 1e-12:
            raise ModelError("weights must be nonnegative and sum to 1")
        if not self.theta0 > 0:
            raise ModelError("theta0 must be positive")

    def component_model(self, i: int) -> CnlModel:
        """Mixing component ``i`` as a cross-nested logit with 0/1 inclusions."""
        comp = self.components[i]
        alpha = np.zeros((len(comp.nests), self.n_routes))
        delta = np.ones(len(comp.nests))
        for m, nest in enumerate(comp.nests):
            alpha[m, list(nest.routes)] = 1.0
            if nest.link is not None:
                delta[m] = self.deltas[nest.link]
        ids = tuple(n.link if n.link is not None else f"route:{n.routes[0]}" for n in comp.nests)
        return CnlModel(alpha, delta, self.theta0, ids)


def build_conl(net: Network, choice_set: ChoiceSet, theta0: float, variant: int = 24,
               dmin: float = 0.0, gamma: float = 1.0) -> ConlModel:
    components = build_mixing_structure(net, choice_set)
    validate_structure(components, net, choice_set)
    if not any(c.is_nested for c in components):
        # nothing is shared: the single all-singleton component is an MNL
        return ConlModel(tuple(components), np.ones(1), {}, theta0, len(choice_set))
    weights = component_weights(components, net, variant, gamma)
    targets = nesting_deltas(components, weights, net, choice_set, dmin)
    deltas = {t.link: t.delta for t in targets}
    return ConlModel(tuple(components), weights, deltas, theta0, len(choice_set), tuple(targets))


def conl_probabilities(model: ConlModel, impedances) -> np.ndarray:
    """Weighted sum of the nested-logit probabilities of each component."""
    p = np.zeros(model.n_routes)
    for i, w in enumerate(model.weights):
        if w > 0:
            p += w * cnl_probabilities(model.component_model(i), impedances)
    return p / p.sum()


def conl_fcm(model: ConlModel) -> np.ndarray:
    """Utility correlations: for each pair, the weighted sum over components
    of ``1 - delta^2`` of the nest holding both routes (0 if none)."""
    n = model.n_routes
    corr = np.zeros((n, n))
    for comp, w in zip(model.components, model.weights):
        for nest in comp.link_nests:
            r = list(nest.routes)
            corr[np.ix_(r, r)] += w * (1.0 - model.deltas[nest.link] ** 2)
    np.fill_diagonal(corr, 1.0)
    return corr


def conl_fcm_by_links(model: ConlModel, net: Network, choice_set: ChoiceSet) -> np.ndarray:
    """The same correlations summed link by link over the shared links of each
    pair, with the weight mass of the components holding that link's nest."""
    n = model.n_routes
    occ = link_occurrences(list(model.components))
    corr = np.eye(n)
    routes = choice_set.routes
    for k in range(n):
        for kk in range(k + 1, n):
            total = 0.0
            for l in set(routes[k].links) & set(routes[kk].links):
                mass = sum(model.weights[i] for i in occ.get(l, ()))
                total += (1.0 - model.deltas.get(l, 1.0) ** 2) * mass
            corr[k, kk] = corr[kk, k] = total
    return corr
