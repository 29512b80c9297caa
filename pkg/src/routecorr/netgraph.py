"""Network and route data model, network text format and built-in test networks."""

from __future__ import annotations

import csv
import io
import math
import re
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Sequence, TextIO


class NetworkError(ValueError):
    """Raised for malformed networks, routes or network files."""


def natural_key(ident: str) -> tuple:
    """Sort key ordering embedded integers numerically ("2" < "10")."""
    parts = re.split(r"(\d+)", ident)
    return tuple((0, int(p), "") if p.isdigit() else (1, 0, p) for p in parts if p)


def route_key(links: Sequence[str]) -> tuple:
    return tuple(natural_key(l) for l in links)


@dataclass(frozen=True)
class Link:
    id: str
    tail: str
    head: str
    impedance: float


@dataclass(frozen=True)
class OdPair:
    origin: str
    destination: str

    @classmethod
    def parse(cls, text: str) -> "OdPair":
        parts = re.split(r"[-,:\s]+", text.strip())
        if len(parts) != 2 or not all(parts):
            raise NetworkError(f"cannot parse o-d pair {text!r} (expected e.g. '1-9')")
        return cls(parts[0], parts[1])

    def __str__(self) -> str:
        return f"{self.origin}-{self.destination}"


@dataclass(frozen=True)
class Network:
    nodes: frozenset[str]
    links: tuple[Link, ...]
    _by_id: dict = field(init=False, repr=False, compare=False)
    _out: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        by_id: dict[str, Link] = {}
        out: dict[str, list[Link]] = {n: [] for n in self.nodes}
        for link in self.links:
            if link.id in by_id:
                raise NetworkError(f"duplicate link id {link.id!r}")
            if not link.impedance > 0 or not math.isfinite(link.impedance):
                raise NetworkError(f"link {link.id!r}: non-positive impedance {link.impedance!r}")
            if link.tail == link.head:
                raise NetworkError(f"link {link.id!r}: tail equals head")
            for node in (link.tail, link.head):
                if node not in self.nodes:
                    raise NetworkError(f"link {link.id!r}: dangling node reference {node!r}")
            by_id[link.id] = link
            out[link.tail].append(link)
        object.__setattr__(self, "_by_id", by_id)
        object.__setattr__(self, "_out", out)

    @classmethod
    def from_links(cls, links: Iterable[tuple[str, str, str, float]], nodes: Iterable[str] = ()) -> "Network":
        links = tuple(Link(str(i), str(t), str(h), float(c)) for i, t, h, c in links)
        all_nodes = {str(n) for n in nodes}
        for link in links:
            all_nodes.update((link.tail, link.head))
        return cls(frozenset(all_nodes), links)

    def link(self, link_id: str) -> Link:
        try:
            return self._by_id[link_id]
        except KeyError:
            raise NetworkError(f"unknown link id {link_id!r}") from None

    def out_links(self, node: str) -> list[Link]:
        return self._out[node]

    def impedance(self, link_id: str) -> float:
        return self.link(link_id).impedance

    def sorted_nodes(self) -> list[str]:
        return sorted(self.nodes, key=natural_key)

    def scaled(self, factor: float) -> "Network":
        return Network(self.nodes, tuple(Link(l.id, l.tail, l.head, l.impedance * factor) for l in self.links))

    def with_impedances(self, impedances: dict[str, float]) -> "Network":
        return Network(self.nodes, tuple(Link(l.id, l.tail, l.head, impedances.get(l.id, l.impedance)) for l in self.links))

    def check_od(self, od: OdPair) -> None:
        if od.origin == od.destination:
            raise NetworkError(f"o-d pair {od}: origin equals destination")
        for node in (od.origin, od.destination):
            if node not in self.nodes:
                raise NetworkError(f"o-d pair {od}: unknown node {node!r}")


@dataclass(frozen=True)
class Route:
    links: tuple[str, ...]
    impedance: float

    def __len__(self) -> int:
        return len(self.links)


def make_route(net: Network, links: Sequence[str]) -> Route:
    """Validate a link sequence as an acyclic connected route and cache its impedance."""
    if not links:
        raise NetworkError("empty route")
    objs = [net.link(l) for l in links]
    seen = {objs[0].tail}
    for prev, cur in zip(objs, objs[1:]):
        if prev.head != cur.tail:
            raise NetworkError(f"links {prev.id!r} and {cur.id!r} are not connected")
    for obj in objs:
        if obj.head in seen:
            raise NetworkError(f"route revisits node {obj.head!r}")
        seen.add(obj.head)
    return Route(tuple(links), route_impedance(net, links))


@dataclass(frozen=True)
class ChoiceSet:
    od: OdPair
    routes: tuple[Route, ...]

    def __post_init__(self):
        ordered = tuple(sorted(self.routes, key=lambda r: route_key(r.links)))
        if len({r.links for r in ordered}) != len(ordered):
            raise NetworkError("duplicate routes in choice set")
        object.__setattr__(self, "routes", ordered)

    def __len__(self) -> int:
        return len(self.routes)

    def __iter__(self):
        return iter(self.routes)

    @property
    def impedances(self):
        import numpy as np

        return np.array([r.impedance for r in self.routes], dtype=float)

    @property
    def min_impedance(self) -> float:
        return min(r.impedance for r in self.routes)

    def links_used(self) -> list[str]:
        used = {l for r in self.routes for l in r.links}
        return sorted(used, key=natural_key)

    def to_csv(self, stream: TextIO) -> None:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(["route_index", "link_sequence", "impedance"])
        for k, route in enumerate(self.routes):
            writer.writerow([k, ";".join(route.links), repr(route.impedance)])


def route_impedance(net: Network, links: Iterable[str]) -> float:
    return math.fsum(net.impedance(l) for l in links)


def overlap_impedance(net: Network, route_a: Route | Sequence[str], route_b: Route | Sequence[str]) -> float:
    """Total impedance of the links present in both routes."""
    la = route_a.links if isinstance(route_a, Route) else tuple(route_a)
    lb = route_b.links if isinstance(route_b, Route) else tuple(route_b)
    common = set(la) & set(lb)
    return math.fsum(net.impedance(l) for l in sorted(common, key=natural_key))


# --------------------------------------------------------------------------
# text format
# --------------------------------------------------------------------------

def load_network(stream: TextIO | str) -> tuple[Network, OdPair | None]:
    """Parse the line-oriented network format.

    Returns the network and the first ``od`` line found (or None).
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    nodes: list[str] = []
    links: list[Link] = []
    seen_ids: set[str] = set()
    od = None
    for lineno, raw in enumerate(stream, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        kind = tok[0].lower()
        try:
            if kind == "node" and len(tok) == 2:
                nodes.append(tok[1])
            elif kind == "link" and len(tok) == 5:
                link_id, tail, head = tok[1], tok[2], tok[3]
                imp = float(tok[4])
                if link_id in seen_ids:
                    raise NetworkError(f"duplicate link id {link_id!r}")
                if not imp > 0:
                    raise NetworkError(f"non-positive impedance {tok[4]!r}")
                seen_ids.add(link_id)
                links.append(Link(link_id, tail, head, imp))
            elif kind == "od" and len(tok) == 3:
                if od is None:
                    od = OdPair(tok[1], tok[2])
            else:
                raise NetworkError(f"unrecognised statement {line!r}")
        except (NetworkError, ValueError) as exc:
            raise NetworkError(f"line {lineno}: {exc}") from None
    all_nodes = set(nodes)
    for link in links:
        all_nodes.update((link.tail, link.head))
    net = Network(frozenset(all_nodes), tuple(links))
    if od is not None:
        net.check_od(od)
    return net, od


def dump_network(net: Network, od: OdPair | None = None) -> str:
    out = io.StringIO()
    for node in net.sorted_nodes():
        out.write(f"node {node}\n")
    for link in net.links:
        out.write(f"link {link.id} {link.tail} {link.head} {link.impedance!r}\n")
    if od is not None:
        out.write(f"od {od.origin} {od.destination}\n")
    return out.getvalue()


# --------------------------------------------------------------------------
# built-in test networks
# --------------------------------------------------------------------------

def _positive(**params: float) -> None:
    for name, value in params.items():
        if not value > 0:
            raise NetworkError(f"parameter {name} must be positive, got {value!r}")


def fourlink(c: float = 10.0, h: float = 1.0) -> tuple[Network, OdPair]:
    """Long bypass / short bypass network: one direct route and two routes
    sharing a first link of impedance c - h."""
    _positive(c=c, h=h)
    if not h < c:
        raise NetworkError("fourlink requires h < c")
    net = Network.from_links([
        ("1", "o", "d", c),
        ("2", "o", "m", c - h),
        ("3", "m", "d", h),
        ("4", "m", "d", h),
    ])
    return net, OdPair("o", "d")


def braess(a: float = 4.0, b: float = 5.0, h: float = 0.0) -> tuple[Network, OdPair]:
    """Braess network, o-d 1-4.

    Links 1->2 and 3->4 cost ``a``, links 1->3 and 2->4 cost ``b`` and the
    bridge 2->3 costs ``b - a + h``, so that the three routes tie when h = 0.
    """
    _positive(a=a, b=b)
    bridge = b - a + h
    if not bridge > 0:
        raise NetworkError(f"bridge impedance b - a + h must be positive, got {bridge!r}")
    net = Network.from_links([
        ("1", "1", "2", a),
        ("2", "1", "3", b),
        ("3", "2", "3", bridge),
        ("4", "2", "4", b),
        ("5", "3", "4", a),
    ])
    return net, OdPair("1", "4")


def mesh2x2(c: float = 1.0) -> tuple[Network, OdPair]:
    """Regular 2x2 mesh: nodes 1..9 row by row from the origin corner, forward links only."""
    _positive(c=c)
    return _grid(3, 3, lambda t, h: c), OdPair("1", "9")


def _grid(ncols: int, nrows: int, cost) -> Network:
    arcs = []
    for r in range(nrows):
        for q in range(ncols):
            n = r * ncols + q + 1
            if q + 1 < ncols:
                arcs.append((n, n + 1))
            if r + 1 < nrows:
                arcs.append((n, n + ncols))
    arcs.sort()
    return Network.from_links([(str(i), str(t), str(h), cost(t, h)) for i, (t, h) in enumerate(arcs, start=1)])


def mesh_bypass() -> tuple[Network, OdPair]:
    return _load_data("mesh_bypass.txt")


def sioux_falls() -> tuple[Network, OdPair]:
    """Sioux-Falls network with the standard free-flow travel times, o-d 1-15."""
    return _load_data("sioux_falls.txt")


def _load_data(name: str) -> tuple[Network, OdPair]:
    text = resources.files("routecorr.data").joinpath(name).read_text(encoding="utf-8")
    net, od = load_network(text)
    assert od is not None
    return net, od


BUILTINS = {
    "fourlink": fourlink,
    "braess": braess,
    "mesh2x2": mesh2x2,
    "mesh_bypass": mesh_bypass,
    "sioux_falls": sioux_falls,
}


def builtin_network(name: str, **params: float) -> tuple[Network, OdPair]:
    try:
        factory = BUILTINS[name]
    except KeyError:
        raise NetworkError(f"unknown network {name!r}; choose from {sorted(BUILTINS)}") from None
    try:
        return factory(**params)
    except TypeError as exc:
        raise NetworkError(f"bad parameters for {name}: {exc}") from None


def parse_params(text: str) -> dict[str, float]:
    """Parse 'a=4,b=5' into a dict."""
    params = {}
    for item in filter(None, (s.strip() for s in text.split(","))):
        key, _, value = item.partition("=")
        if not _:
            raise NetworkError(f"bad network parameter {item!r} (expected key=value)")
        params[key.strip()] = float(value)
    return params
