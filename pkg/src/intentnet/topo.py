"""Topology domain model: switches, links, city endpoints, and paths.

The topology is declared in a JSON file (see ``parse_topology``) and is
immutable after parsing; every other module works against the types here.
"""

from __future__ import annotations

import ipaddress
import json
import re
from dataclasses import dataclass, field

LinkKey = tuple[tuple[str, int], tuple[str, int]]

_DPID_RE = re.compile(r"^[0-9a-fA-F]{2}(:[0-9a-fA-F]{2}){7}$")


class TopologyError(Exception):
    pass


class TopologySyntaxError(TopologyError):
    """The document is not well-formed JSON (reports line/column)."""


class TopologyValidationError(TopologyError):
    """The document is well-formed but violates a topology invariant."""


@dataclass(frozen=True, order=True)
class Dpid:
    """64-bit datapath identifier, rendered as colon-separated hex pairs."""

    value: int

    def __post_init__(self):
        if not 0 <= self.value < 2**64:
            raise ValueError(f"dpid out of range: {self.value}")

    @classmethod
    def parse(cls, text: str) -> "Dpid":
        if not isinstance(text, str) or not _DPID_RE.match(text):
            raise ValueError(f"invalid dpid: {text!r}")
        return cls(int(text.replace(":", ""), 16))

    def __str__(self) -> str:
        raw = f"{self.value:016x}"
        return ":".join(raw[i : i + 2] for i in range(0, 16, 2))


@dataclass(frozen=True)
class Switch:
    dpid: Dpid
    name: str
    ports: frozenset[int]


@dataclass(frozen=True)
class Link:
    """Undirected link between two (switch, port) attachment points."""

    a: tuple[str, int]
    b: tuple[str, int]
    latency_ms: float
    capacity_mbps: float

    def key(self) -> LinkKey:
        return tuple(sorted((self.a, self.b)))  # type: ignore[return-value]

    def other_end(self, switch: str) -> tuple[str, int]:
        if self.a[0] == switch:
            return self.b
        if self.b[0] == switch:
            return self.a
        raise ValueError(f"{switch} is not an end of {self.key()}")

    def port_on(self, switch: str) -> int:
        if self.a[0] == switch:
            return self.a[1]
        if self.b[0] == switch:
            return self.b[1]
        raise ValueError(f"{switch} is not an end of {self.key()}")


@dataclass(frozen=True)
class Endpoint:
    """City attachment point: where an external prefix enters the fabric."""

    city: str
    switch: str
    port: int
    prefix: ipaddress.IPv4Network


@dataclass(frozen=True)
class Hop:
    dpid: Dpid
    in_port: int
    out_port: int


@dataclass(frozen=True)
class Path:
    """Simple switch path between two endpoints, with per-hop ports."""

    hops: tuple[Hop, ...]
    ingress: Endpoint
    egress: Endpoint

    def dpids(self) -> tuple[Dpid, ...]:
        return tuple(h.dpid for h in self.hops)

    def reversed(self) -> "Path":
        hops = tuple(Hop(h.dpid, h.out_port, h.in_port) for h in reversed(self.hops))
        return Path(hops=hops, ingress=self.egress, egress=self.ingress)


@dataclass(frozen=True)
class Topology:
    switches: tuple[Switch, ...]
    links: tuple[Link, ...]
    endpoints: tuple[Endpoint, ...]
    # Derived lookup tables; excluded from equality so that a re-parsed
    # topology compares structurally equal.
    _by_name: dict = field(default_factory=dict, compare=False, repr=False)
    _by_dpid: dict = field(default_factory=dict, compare=False, repr=False)
    _by_city: dict = field(default_factory=dict, compare=False, repr=False)
    _link_at: dict = field(default_factory=dict, compare=False, repr=False)
    _endpoint_at: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        self._by_name.update({s.name: s for s in self.switches})
        self._by_dpid.update({s.dpid: s for s in self.switches})
        self._by_city.update({e.city: e for e in self.endpoints})
        for link in self.links:
            self._link_at[link.a] = link
            self._link_at[link.b] = link
        self._endpoint_at.update({(e.switch, e.port): e for e in self.endpoints})

    def switch_by_name(self, name: str) -> Switch:
        return self._by_name[name]

    def switch_by_dpid(self, dpid: Dpid) -> Switch:
        return self._by_dpid[dpid]

    def endpoint_by_city(self, city: str) -> Endpoint | None:
        return self._by_city.get(city)

    def cities(self) -> list[str]:
        return [e.city for e in self.endpoints]

    def link_at(self, switch: str, port: int) -> Link | None:
        return self._link_at.get((switch, port))

    def endpoint_at(self, switch: str, port: int) -> Endpoint | None:
        return self._endpoint_at.get((switch, port))

    def endpoint_for_address(self, address: str | ipaddress.IPv4Address) -> Endpoint | None:
        addr = ipaddress.IPv4Address(address) if isinstance(address, str) else address
        for ep in self.endpoints:
            if addr in ep.prefix:
                return ep
        return None


def normalize_city(text: str) -> str:
    """Lowercase token sequence joined by single spaces ("New  York" -> "new york")."""
    return " ".join(text.lower().split())


def prefix_contains(prefix: str | ipaddress.IPv4Network, address: str | ipaddress.IPv4Address) -> bool:
    net = ipaddress.IPv4Network(prefix) if isinstance(prefix, str) else prefix
    addr = ipaddress.IPv4Address(address) if isinstance(address, str) else address
    return addr in net


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise TopologyValidationError(message)


def _field(obj: dict, key: str, kind, where: str):
    if key not in obj:
        raise TopologyValidationError(f"missing field {key!r} in {where}")
    value = obj[key]
    if kind is float:
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise TopologyValidationError(f"field {key!r} in {where} must be a number")
        return float(value)
    if not isinstance(value, kind) or isinstance(value, bool):
        raise TopologyValidationError(f"field {key!r} in {where} has wrong type")
    return value


def parse_topology(document: bytes | str) -> Topology:
    """Parse and validate a topology document.

    Raises TopologySyntaxError for malformed JSON (with position) and
    TopologyValidationError naming the violated invariant otherwise.
    """
    if isinstance(document, bytes):
        document = document.decode("utf-8")
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise TopologySyntaxError(
            f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from exc

    _require(isinstance(doc, dict), "document must be a JSON object")
    _require(doc.get("version") == 1, f"unsupported version: {doc.get('version')!r}")

    raw_switches = doc.get("switches") or []
    _require(isinstance(raw_switches, list), "switches must be a list")
    _require(len(raw_switches) > 0, "empty topology: no switches declared")

    names: set[str] = set()
    dpids: set[Dpid] = set()
    switch_rows = []
    for row in raw_switches:
        name = _field(row, "name", str, "switch")
        try:
            dpid = Dpid.parse(_field(row, "dpid", str, f"switch {name!r}"))
        except ValueError as exc:
            raise TopologyValidationError(str(exc)) from exc
        _require(name not in names, f"duplicate switch name: {name!r}")
        _require(dpid not in dpids, f"duplicate dpid: {dpid}")
        names.add(name)
        dpids.add(dpid)
        switch_rows.append((name, dpid))

    used_ports: set[tuple[str, int]] = set()

    def claim_port(switch: str, port, where: str) -> int:
        _require(switch in names, f"unknown switch {switch!r} referenced by {where}")
        _require(
            isinstance(port, int) and not isinstance(port, bool) and port > 0,
            f"port on {switch!r} in {where} must be a positive integer",
        )
        _require(
            (switch, port) not in used_ports,
            f"port {switch}:{port} already in use ({where})",
        )
        used_ports.add((switch, port))
        return port

    links = []
    raw_links = doc.get("links") or []
    _require(isinstance(raw_links, list), "links must be a list")
    for i, row in enumerate(raw_links):
        where = f"link #{i}"
        a_name = _field(row, "a", str, where)
        b_name = _field(row, "b", str, where)
        _require(a_name != b_name, f"self-link on {a_name!r} not allowed")
        a_port = claim_port(a_name, row.get("a_port"), where)
        b_port = claim_port(b_name, row.get("b_port"), where)
        latency = _field(row, "latency_ms", float, where)
        capacity = _field(row, "capacity_mbps", float, where)
        _require(latency >= 0, f"negative latency_ms on {where}")
        _require(capacity > 0, f"capacity_mbps must be positive on {where}")
        links.append(Link(a=(a_name, a_port), b=(b_name, b_port), latency_ms=latency, capacity_mbps=capacity))

    endpoints = []
    cities: set[str] = set()
    raw_endpoints = doc.get("endpoints") or []
    _require(isinstance(raw_endpoints, list), "endpoints must be a list")
    for row in raw_endpoints:
        city = normalize_city(_field(row, "city", str, "endpoint"))
        _require(bool(city), "endpoint city must be non-empty")
        _require(city not in cities, f"duplicate city: {city!r}")
        cities.add(city)
        where = f"endpoint {city!r}"
        switch = _field(row, "switch", str, where)
        port = claim_port(switch, row.get("port"), where)
        try:
            prefix = ipaddress.IPv4Network(_field(row, "prefix", str, where))
        except ValueError as exc:
            raise TopologyValidationError(f"invalid prefix on {where}: {exc}") from exc
        for other in endpoints:
            _require(
                not prefix.overlaps(other.prefix),
                f"overlapping prefixes: {prefix} and {other.prefix}",
            )
        endpoints.append(Endpoint(city=city, switch=switch, port=port, prefix=prefix))

    # Per-switch port sets are derived from link and endpoint attachments.
    ports_of: dict[str, set[int]] = {name: set() for name, _ in switch_rows}
    for link in links:
        ports_of[link.a[0]].add(link.a[1])
        ports_of[link.b[0]].add(link.b[1])
    for ep in endpoints:
        ports_of[ep.switch].add(ep.port)

    switches = tuple(
        Switch(dpid=dpid, name=name, ports=frozenset(ports_of[name]))
        for name, dpid in switch_rows
    )

    # Connectivity over the switch graph induced by links.
    neighbors: dict[str, set[str]] = {name: set() for name, _ in switch_rows}
    for link in links:
        neighbors[link.a[0]].add(link.b[0])
        neighbors[link.b[0]].add(link.a[0])
    seen = {switch_rows[0][0]}
    frontier = [switch_rows[0][0]]
    while frontier:
        for nxt in neighbors[frontier.pop()]:
            if nxt not in seen:
                seen.add(nxt)
                frontier.append(nxt)
    _require(len(seen) == len(switch_rows), "disconnected topology")

    return Topology(switches=switches, links=tuple(links), endpoints=tuple(endpoints))


def serialize_topology(topology: Topology) -> str:
    doc = {
        "version": 1,
        "switches": [{"dpid": str(s.dpid), "name": s.name} for s in topology.switches],
        "links": [
            {
                "a": l.a[0],
                "a_port": l.a[1],
                "b": l.b[0],
                "b_port": l.b[1],
                "latency_ms": l.latency_ms,
                "capacity_mbps": l.capacity_mbps,
            }
            for l in topology.links
        ],
        "endpoints": [
            {"city": e.city, "switch": e.switch, "port": e.port, "prefix": str(e.prefix)}
            for e in topology.endpoints
        ],
    }
    return json.dumps(doc, indent=2)


@dataclass(frozen=True)
class AdjacencyEntry:
    neighbor: Dpid
    local_port: int
    remote_port: int
    latency_ms: float
    capacity_mbps: float


def adjacency(topology: Topology) -> dict[Dpid, list[AdjacencyEntry]]:
    """Directed adjacency view; symmetric with mirrored ports, ordered by
    (neighbor dpid, local port) for deterministic traversals."""
    out: dict[Dpid, list[AdjacencyEntry]] = {s.dpid: [] for s in topology.switches}
    for link in topology.links:
        (a_name, a_port), (b_name, b_port) = link.a, link.b
        a = topology.switch_by_name(a_name)
        b = topology.switch_by_name(b_name)
        out[a.dpid].append(AdjacencyEntry(b.dpid, a_port, b_port, link.latency_ms, link.capacity_mbps))
        out[b.dpid].append(AdjacencyEntry(a.dpid, b_port, a_port, link.latency_ms, link.capacity_mbps))
    for entries in out.values():
        entries.sort(key=lambda e: (e.neighbor, e.local_port))
    return out


def path_links(topology: Topology, path: Path) -> list[Link]:
    """The declared links a path traverses, in hop order."""
    links = []
    for i in range(len(path.hops) - 1):
        cur = topology.switch_by_dpid(path.hops[i].dpid)
        link = topology.link_at(cur.name, path.hops[i].out_port)
        if link is None:
            raise ValueError(f"no link at {cur.name}:{path.hops[i].out_port}")
        links.append(link)
    return links
