"""Flow tables and packet tracing for the simulated dataplane.

Switches have no control plane of their own: forwarding is purely a
flow-table lookup, and a table miss drops the packet.
"""

from __future__ import annotations

import ipaddress
from dataclasses import dataclass
from typing import Iterable, Mapping

from .topo import Dpid, Hop, Topology

DELIVERED = "delivered"
DROP = "drop"
LOOP = "loop"

ADD = "add"
DELETE = "delete"


def cookie_hex(cookie: int) -> str:
    return f"{cookie & 0xFFFFFFFFFFFFFFFF:016x}"


@dataclass(frozen=True)
class FlowMatch:
    """Match fields; an absent field is a wildcard. At least one must be set."""

    in_port: int | None = None
    ipv4_src: ipaddress.IPv4Network | None = None
    ipv4_dst: ipaddress.IPv4Network | None = None

    def __post_init__(self):
        if self.in_port is None and self.ipv4_src is None and self.ipv4_dst is None:
            raise ValueError("flow match must set at least one field")

    def matches(self, src_ip: ipaddress.IPv4Address, dst_ip: ipaddress.IPv4Address, in_port: int) -> bool:
        if self.in_port is not None and self.in_port != in_port:
            return False
        if self.ipv4_src is not None and src_ip not in self.ipv4_src:
            return False
        if self.ipv4_dst is not None and dst_ip not in self.ipv4_dst:
            return False
        return True


@dataclass(frozen=True)
class FlowEntry:
    priority: int
    match: FlowMatch
    out_port: int
    cookie: int

    def __post_init__(self):
        if not 0 <= self.priority <= 65535:
            raise ValueError(f"priority out of range: {self.priority}")
        if self.out_port <= 0:
            raise ValueError(f"out_port must be positive: {self.out_port}")


def _plen(net: ipaddress.IPv4Network | None) -> int:
    return -1 if net is None else net.prefixlen


def _rank(entry: FlowEntry) -> tuple:
    # Highest priority wins; ties fall to longest dst prefix, longest src
    # prefix, then lexicographically smallest cookie. The trailing match
    # fields only make the order total (stable entries() listing).
    return (
        -entry.priority,
        -_plen(entry.match.ipv4_dst),
        -_plen(entry.match.ipv4_src),
        cookie_hex(entry.cookie),
        entry.match.in_port if entry.match.in_port is not None else -1,
        str(entry.match.ipv4_dst),
        str(entry.match.ipv4_src),
        entry.out_port,
    )


class FlowTable:
    """Immutable set of flow entries keyed by (priority, match)."""

    __slots__ = ("_entries",)

    def __init__(self, entries: Iterable[FlowEntry] = ()):
        table: dict[tuple, FlowEntry] = {}
        for entry in entries:
            table[(entry.priority, entry.match)] = entry
        self._entries = table

    def entries(self) -> tuple[FlowEntry, ...]:
        return tuple(sorted(self._entries.values(), key=_rank))

    def __len__(self) -> int:
        return len(self._entries)

    def __eq__(self, other) -> bool:
        return isinstance(other, FlowTable) and self._entries == other._entries

    def add(self, entry: FlowEntry) -> "FlowTable":
        """Insert, overwriting any entry with equal (priority, match)."""
        table = FlowTable()
        table._entries = dict(self._entries)
        table._entries[(entry.priority, entry.match)] = entry
        return table

    def delete_cookie(self, cookie: int) -> "FlowTable":
        table = FlowTable()
        table._entries = {k: e for k, e in self._entries.items() if e.cookie != cookie}
        return table

    def cookies(self) -> set[int]:
        return {e.cookie for e in self._entries.values()}

    def lookup(
        self,
        src_ip: ipaddress.IPv4Address | str,
        dst_ip: ipaddress.IPv4Address | str,
        in_port: int,
    ) -> FlowEntry | None:
        src = ipaddress.IPv4Address(src_ip) if isinstance(src_ip, str) else src_ip
        dst = ipaddress.IPv4Address(dst_ip) if isinstance(dst_ip, str) else dst_ip
        best: FlowEntry | None = None
        for entry in self._entries.values():
            if entry.match.matches(src, dst, in_port):
                if best is None or _rank(entry) < _rank(best):
                    best = entry
        return best


def apply_flow_mod(
    table: FlowTable,
    command: str,
    *,
    entry: FlowEntry | None = None,
    cookie: int | None = None,
) -> FlowTable:
    """ADD inserts/overwrites an entry; DELETE removes all entries with the cookie."""
    if command == ADD:
        if entry is None:
            raise ValueError("ADD requires an entry")
        return table.add(entry)
    if command == DELETE:
        if cookie is None:
            raise ValueError("DELETE requires a cookie filter")
        return table.delete_cookie(cookie)
    raise ValueError(f"unknown flow-mod command: {command!r}")


@dataclass(frozen=True)
class PacketProbe:
    src_ip: ipaddress.IPv4Address
    dst_ip: ipaddress.IPv4Address
    ingress: tuple[str, int]

    @classmethod
    def make(cls, src_ip: str, dst_ip: str, ingress: tuple[str, int]) -> "PacketProbe":
        return cls(
            src_ip=ipaddress.IPv4Address(src_ip),
            dst_ip=ipaddress.IPv4Address(dst_ip),
            ingress=ingress,
        )


@dataclass(frozen=True)
class TraceResult:
    outcome: str  # DELIVERED, DROP, or LOOP
    hops: tuple[Hop, ...]

    def hop_names(self, topology: Topology) -> list[str]:
        return [topology.switch_by_dpid(h.dpid).name for h in self.hops]


def trace_packet(
    tables: Mapping[Dpid, FlowTable],
    topology: Topology,
    probe: PacketProbe,
) -> TraceResult:
    """Follow flow-table lookups hop by hop from the probe's ingress.

    Ends when the chosen output port is an endpoint attachment (DELIVERED),
    a lookup misses (DROP), or a switch would be visited twice (LOOP).
    Always terminates within |switches| lookups.
    """
    name, port = probe.ingress
    if topology.endpoint_at(name, port) is None and topology.link_at(name, port) is None:
        raise ValueError(f"probe ingress {name}:{port} references no declared port")
    current = topology.switch_by_name(name)
    in_port = port
    hops: list[Hop] = []
    visited: set[Dpid] = set()
    while True:
        if current.dpid in visited:
            return TraceResult(LOOP, tuple(hops))
        visited.add(current.dpid)
        table = tables.get(current.dpid, FlowTable())
        entry = table.lookup(probe.src_ip, probe.dst_ip, in_port)
        if entry is None:
            return TraceResult(DROP, tuple(hops))
        hops.append(Hop(current.dpid, in_port, entry.out_port))
        if topology.endpoint_at(current.name, entry.out_port) is not None:
            return TraceResult(DELIVERED, tuple(hops))
        link = topology.link_at(current.name, entry.out_port)
        if link is None:
            return TraceResult(DROP, tuple(hops))
        next_name, next_port = link.other_end(current.name)
        current = topology.switch_by_name(next_name)
        in_port = next_port


@dataclass(frozen=True)
class PortConfig:
    """Configured attributes of one switch port (from the topology file)."""

    kind: str  # "link" or "endpoint"
    latency_ms: float
    capacity_mbps: float | None  # None = unbounded (endpoint attachment)
    peer: str  # "switch:port" or "city:<name>"


def port_configs(topology: Topology, switch_name: str) -> dict[int, PortConfig]:
    switch = topology.switch_by_name(switch_name)
    configs: dict[int, PortConfig] = {}
    for port in switch.ports:
        link = topology.link_at(switch_name, port)
        if link is not None:
            peer_name, peer_port = link.other_end(switch_name)
            configs[port] = PortConfig(
                kind="link",
                latency_ms=link.latency_ms,
                capacity_mbps=link.capacity_mbps,
                peer=f"{peer_name}:{peer_port}",
            )
            continue
        endpoint = topology.endpoint_at(switch_name, port)
        if endpoint is not None:
            configs[port] = PortConfig(
                kind="endpoint",
                latency_ms=0.0,
                capacity_mbps=None,
                peer=f"city:{endpoint.city}",
            )
    return configs


# --- wire codec for flow entries (shared by the southbound protocol) ---


def match_to_wire(match: FlowMatch) -> dict:
    return {
        "in_port": match.in_port,
        "ipv4_src": str(match.ipv4_src) if match.ipv4_src is not None else None,
        "ipv4_dst": str(match.ipv4_dst) if match.ipv4_dst is not None else None,
    }


def match_from_wire(data: dict) -> FlowMatch:
    def net(value):
        return ipaddress.IPv4Network(value) if value is not None else None

    return FlowMatch(
        in_port=data.get("in_port"),
        ipv4_src=net(data.get("ipv4_src")),
        ipv4_dst=net(data.get("ipv4_dst")),
    )


def entry_to_wire(entry: FlowEntry) -> dict:
    return {
        "priority": entry.priority,
        "match": match_to_wire(entry.match),
        "out_port": entry.out_port,
        "cookie": entry.cookie,
    }


def entry_from_wire(data: dict) -> FlowEntry:
    return FlowEntry(
        priority=data["priority"],
        match=match_from_wire(data["match"]),
        out_port=data["out_port"],
        cookie=data["cookie"],
    )
