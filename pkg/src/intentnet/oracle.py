"""Brute-force best-path oracle used to cross-check the intent engine.

Deliberately independent of the engine: path enumeration comes from
networkx, scoring and tie-breaking are spelled out from scratch. Keep the
tie-break chain in sync with the engine's documented one: metric, then
fewer hops, lower latency, lexicographic dpid sequence, link key sequence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import networkx as nx

from .topo import LinkKey, Topology

LEAST_LATENCY = "least latency"
HIGH_BANDWIDTH = "high bandwidth"
LEAST_HOPCOUNT = "least hopcount"
METRICS = (LEAST_LATENCY, HIGH_BANDWIDTH, LEAST_HOPCOUNT)


@dataclass(frozen=True)
class OraclePath:
    names: tuple[str, ...]
    link_keys: tuple[LinkKey, ...]
    latency_ms: float
    bottleneck_mbps: float
    hop_count: int


def _graph(topology: Topology) -> nx.MultiGraph:
    g = nx.MultiGraph()
    for sw in topology.switches:
        g.add_node(sw.name)
    for link in topology.links:
        g.add_edge(
            link.a[0],
            link.b[0],
            key=link.key(),
            latency=link.latency_ms,
            capacity=link.capacity_mbps,
        )
    return g


def enumerate_paths(
    topology: Topology,
    src_name: str,
    dst_name: str,
    reservations: dict[LinkKey, float] | None = None,
) -> list[OraclePath]:
    reservations = reservations or {}
    if src_name == dst_name:
        return [OraclePath((src_name,), (), 0.0, math.inf, 0)]
    g = _graph(topology)
    out = []
    for edge_path in nx.all_simple_edge_paths(g, src_name, dst_name):
        names = (src_name,) + tuple(v for _, v, _ in edge_path)
        keys = tuple(k for _, _, k in edge_path)
        latency = 0.0
        bottleneck = math.inf
        for u, v, k in edge_path:
            data = g.edges[u, v, k]
            latency += data["latency"]
            residual = max(0.0, data["capacity"] - reservations.get(k, 0.0))
            bottleneck = min(bottleneck, residual)
        out.append(OraclePath(names, keys, latency, bottleneck, len(keys)))
    return out


def _selection_key(topology: Topology, metric: str, path: OraclePath) -> tuple:
    if metric == LEAST_LATENCY:
        primary = path.latency_ms
    elif metric == HIGH_BANDWIDTH:
        primary = -path.bottleneck_mbps
    elif metric == LEAST_HOPCOUNT:
        primary = path.hop_count
    else:
        raise ValueError(f"unknown metric: {metric!r}")
    dpid_seq = tuple(str(topology.switch_by_name(n).dpid) for n in path.names)
    return (primary, path.hop_count, path.latency_ms, dpid_seq, path.link_keys)


def best_path(
    topology: Topology,
    metric: str,
    src_name: str,
    dst_name: str,
    reservations: dict[LinkKey, float] | None = None,
    min_bottleneck_mbps: float = 0.0,
) -> OraclePath | None:
    """Exhaustively pick the best path, or None when nothing qualifies."""
    candidates = [
        p
        for p in enumerate_paths(topology, src_name, dst_name, reservations)
        if p.bottleneck_mbps >= min_bottleneck_mbps
    ]
    if not candidates:
        return None
    return min(candidates, key=lambda p: _selection_key(topology, metric, p))


def max_residual_bottleneck(
    topology: Topology,
    src_name: str,
    dst_name: str,
    reservations: dict[LinkKey, float] | None = None,
) -> float | None:
    """Largest residual bottleneck over all simple paths; None if no path."""
    paths = enumerate_paths(topology, src_name, dst_name, reservations)
    if not paths:
        return None
    return max(p.bottleneck_mbps for p in paths)
