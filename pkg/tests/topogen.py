"""Random connected topologies for oracle cross-checks."""

import json
import random

from intentnet.topo import Topology, parse_topology


def random_topology(
    rng: random.Random,
    max_switches: int = 8,
    max_links: int = 14,
    cities: tuple[str, ...] = ("alpha", "omega"),
) -> Topology:
    n = rng.randint(2, max_switches)
    names = [f"s{i}" for i in range(1, n + 1)]
    next_port = {name: 1 for name in names}

    def take_port(name):
        port = next_port[name]
        next_port[name] += 1
        return port

    pairs = set()
    links = []

    def add_link(a, b):
        pairs.add(frozenset((a, b)))
        links.append(
            {
                "a": a,
                "a_port": take_port(a),
                "b": b,
                "b_port": take_port(b),
                "latency_ms": round(rng.uniform(1, 100), 1),
                "capacity_mbps": rng.choice([10, 100, 1000]),
            }
        )

    # Spanning tree first, then extra edges up to the link budget.
    for i in range(1, n):
        add_link(names[rng.randrange(i)], names[i])
    candidates = [
        (a, b)
        for i, a in enumerate(names)
        for b in names[i + 1 :]
        if frozenset((a, b)) not in pairs
    ]
    rng.shuffle(candidates)
    for a, b in candidates[: max(0, min(max_links, n * (n - 1) // 2) - len(links))]:
        add_link(a, b)

    endpoint_switches = rng.sample(names, 2)
    endpoints = [
        {"city": city, "switch": sw, "port": take_port(sw), "prefix": f"10.{i + 1}.0.0/24"}
        for i, (city, sw) in enumerate(zip(cities, endpoint_switches))
    ]

    doc = {
        "version": 1,
        "switches": [
            {"dpid": f"00:00:00:00:00:00:00:{i:02x}", "name": name}
            for i, name in enumerate(names, start=1)
        ],
        "links": links,
        "endpoints": endpoints,
    }
    return parse_topology(json.dumps(doc))
