"""Efficient-route enumeration and Monte-Carlo choice-set sampling."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .netgraph import ChoiceSet, Network, NetworkError, OdPair, Route, natural_key

#: Draws are generated in fixed-size chunks, each with its own Philox counter,
#: so results do not depend on how chunks are scheduled.
CHUNK = 1 << 15

#: Sampled link impedances are clamped to this fraction of the mean impedance.
IMPEDANCE_FLOOR = 1e-9


def min_costs_from(net: Network, origin: str) -> dict[str, float]:
    """Single-source minimum route costs (Dijkstra); unreachable nodes get inf."""
    if origin not in net.nodes:
        raise NetworkError(f"unknown origin {origin!r}")
    dist = {n: math.inf for n in net.nodes}
    dist[origin] = 0.0
    heap = [(0.0, natural_key(origin), origin)]
    while heap:
        d, _, node = heapq.heappop(heap)
        if d > dist[node]:
            continue
        for link in net.out_links(node):
            nd = d + link.impedance
            if nd < dist[link.head]:
                dist[link.head] = nd
                heapq.heappush(heap, (nd, natural_key(link.head), link.head))
    return dist


@dataclass(frozen=True)
class EfficientSubgraph:
    origin: str
    costs: dict[str, float]
    links: frozenset[str]


def efficient_subgraph(net: Network, origin: str) -> EfficientSubgraph:
    costs = min_costs_from(net, origin)
    eff = frozenset(
        l.id for l in net.links
        if math.isfinite(costs[l.tail]) and costs[l.tail] < costs[l.head]
    )
    return EfficientSubgraph(origin, costs, eff)


def enumerate_efficient_routes(net: Network, od: OdPair) -> ChoiceSet:
    """All routes from origin to destination made of efficient links only.

    Node labels strictly increase along efficient links, so the depth-first
    search below cannot revisit a node.
    """
    net.check_od(od)
    sub = efficient_subgraph(net, od.origin)
    if not math.isfinite(sub.costs[od.destination]):
        raise NetworkError(f"destination {od.destination!r} unreachable from {od.origin!r}")
    target_cost = sub.costs[od.destination]

    routes: list[tuple[str, ...]] = []
    path: list[str] = []

    def visit(node: str) -> None:
        if node == od.destination:
            routes.append(tuple(path))
            return
        for link in sorted(net.out_links(node), key=lambda l: natural_key(l.id)):
            # efficient links only, and prune heads already past the destination label
            if link.id in sub.links and sub.costs[link.head] <= target_cost:
                path.append(link.id)
                visit(link.head)
                path.pop()

    visit(od.origin)
    if not routes:
        raise NetworkError(f"no efficient route for o-d pair {od}")
    return ChoiceSet(od, tuple(Route(r, math.fsum(net.impedance(l) for l in r)) for r in routes))


def _chunk_normals(seed: int, chunk: int, size: int, n_links: int) -> np.ndarray:
    # The chunk index sits in the third counter word: the low words advance
    # with every draw, so this keeps the streams of different chunks disjoint.
    gen = np.random.Generator(np.random.Philox(key=seed, counter=[0, 0, chunk, 0]))
    return gen.standard_normal((size, n_links))


def iter_normal_draws(seed: int, n_draws: int, n_links: int):
    """Yield standard-normal blocks of shape (chunk_size, n_links).

    Block ``c`` holds draws ``c*CHUNK .. c*CHUNK + size - 1`` and is a pure
    function of ``(seed, c)``.
    """
    for chunk, start in enumerate(range(0, n_draws, CHUNK)):
        size = min(CHUNK, n_draws - start)
        yield _chunk_normals(seed, chunk, CHUNK, n_links)[:size]


def _shortest_route(net: Network, od: OdPair, costs: dict[str, float]) -> tuple[str, ...]:
    dist = {n: math.inf for n in net.nodes}
    pred: dict[str, str] = {}
    dist[od.origin] = 0.0
    heap = [(0.0, natural_key(od.origin), od.origin)]
    while heap:
        d, _, node = heapq.heappop(heap)
        if d > dist[node]:
            continue
        if node == od.destination:
            break
        for link in sorted(net.out_links(node), key=lambda l: natural_key(l.id)):
            nd = d + costs[link.id]
            if nd < dist[link.head]:
                dist[link.head] = nd
                pred[link.head] = link.id
                heapq.heappush(heap, (nd, natural_key(link.head), link.head))
    if not math.isfinite(dist[od.destination]):
        raise NetworkError(f"destination {od.destination!r} unreachable from {od.origin!r}")
    seq = []
    node = od.destination
    while node != od.origin:
        link = net.link(pred[node])
        seq.append(link.id)
        node = link.tail
    return tuple(reversed(seq))


def sample_choice_set(net: Network, od: OdPair, n_draws: int, cv: float, seed: int = 0) -> ChoiceSet:
    """Union of shortest routes over Normal-perturbed link impedances.

    Each draw perturbs every link independently with mean c_l and standard
    deviation cv * c_l, clamped below at ``IMPEDANCE_FLOOR * c_l``.
    """
    if n_draws < 1:
        raise ValueError("n_draws must be >= 1")
    if cv < 0:
        raise ValueError("cv must be >= 0")
    net.check_od(od)
    ids = [l.id for l in net.links]
    mean = np.array([l.impedance for l in net.links])
    found: set[tuple[str, ...]] = set()
    if cv == 0:
        found.add(_shortest_route(net, od, dict(zip(ids, mean))))
    else:
        for block in iter_normal_draws(seed, n_draws, len(ids)):
            sampled = np.maximum(mean * (1.0 + cv * block), IMPEDANCE_FLOOR * mean)
            for row in sampled:
                found.add(_shortest_route(net, od, dict(zip(ids, row.tolist()))))
    return ChoiceSet(od, tuple(Route(r, math.fsum(net.impedance(l) for l in r)) for r in found))
