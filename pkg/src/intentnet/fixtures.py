"""Canonical five-switch demo topology used by tests, docs, and the CLI."""

from __future__ import annotations

import json

_TOPO5 = {
    "version": 1,
    "switches": [
        {"dpid": "00:00:00:00:00:00:00:01", "name": "s1"},
        {"dpid": "00:00:00:00:00:00:00:02", "name": "s2"},
        {"dpid": "00:00:00:00:00:00:00:03", "name": "s3"},
        {"dpid": "00:00:00:00:00:00:00:04", "name": "s4"},
        {"dpid": "00:00:00:00:00:00:00:05", "name": "s5"},
    ],
    "links": [
        {"a": "s1", "a_port": 1, "b": "s2", "b_port": 1, "latency_ms": 10.0, "capacity_mbps": 1000},
        {"a": "s2", "a_port": 2, "b": "s3", "b_port": 1, "latency_ms": 10.0, "capacity_mbps": 100},
        {"a": "s1", "a_port": 2, "b": "s4", "b_port": 1, "latency_ms": 30.0, "capacity_mbps": 1000},
        {"a": "s4", "a_port": 2, "b": "s3", "b_port": 2, "latency_ms": 5.0, "capacity_mbps": 1000},
        {"a": "s2", "a_port": 3, "b": "s4", "b_port": 3, "latency_ms": 2.0, "capacity_mbps": 10},
        {"a": "s3", "a_port": 3, "b": "s5", "b_port": 1, "latency_ms": 1.0, "capacity_mbps": 1000},
    ],
    "endpoints": [
        {"city": "denver", "switch": "s1", "port": 4, "prefix": "10.1.0.0/24"},
        {"city": "new york", "switch": "s3", "port": 4, "prefix": "10.3.0.0/24"},
        {"city": "chicago", "switch": "s5", "port": 4, "prefix": "10.5.0.0/24"},
    ],
}


def topo5_document() -> str:
    """The TOPO5 topology file contents as a JSON string."""
    return json.dumps(_TOPO5, indent=2)
