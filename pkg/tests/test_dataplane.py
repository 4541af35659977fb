import ipaddress
import random

from hypothesis import given, settings
from hypothesis import strategies as st

from intentnet.dataplane import (
    ADD,
    DELETE,
    DELIVERED,
    DROP,
    LOOP,
    FlowEntry,
    FlowMatch,
    FlowTable,
    PacketProbe,
    apply_flow_mod,
    cookie_hex,
    entry_from_wire,
    entry_to_wire,
    port_configs,
    trace_packet,
)


def net(s):
    return ipaddress.IPv4Network(s)


def entry(prio=100, in_port=None, src=None, dst="10.0.0.0/8", out=1, cookie=1):
    return FlowEntry(
        priority=prio,
        match=FlowMatch(
            in_port=in_port,
            ipv4_src=net(src) if src else None,
            ipv4_dst=net(dst) if dst else None,
        ),
        out_port=out,
        cookie=cookie,
    )


def test_lookup_single_match():
    table = FlowTable([entry(prio=100, dst="10.3.0.0/24", out=2)])
    hit = table.lookup("10.1.0.1", "10.3.0.9", 4)
    assert hit is not None and hit.out_port == 2
    assert table.lookup("10.1.0.1", "10.9.0.9", 4) is None


def test_lookup_priority_wins():
    low = entry(prio=100, dst="10.3.0.0/24", out=1, cookie=1)
    high = entry(prio=200, dst="10.3.0.0/25", out=2, cookie=2)
    table = FlowTable([low, high])
    hit = table.lookup("10.1.0.1", "10.3.0.1", 4)
    assert hit == high


def test_flow_mod_add_idempotent():
    e = entry()
    table = apply_flow_mod(FlowTable(), ADD, entry=e)
    assert table.entries() == (e,)
    table = apply_flow_mod(table, ADD, entry=e)
    assert table.entries() == (e,)


def test_flow_mod_add_overwrites_same_priority_match():
    e1 = entry(out=1, cookie=7)
    e2 = entry(out=2, cookie=8)
    table = apply_flow_mod(FlowTable(), ADD, entry=e1)
    table = apply_flow_mod(table, ADD, entry=e2)
    assert table.entries() == (e2,)


def test_flow_mod_delete_by_cookie():
    entries = [
        entry(dst="10.1.0.0/24", cookie=5, out=1),
        entry(dst="10.2.0.0/24", cookie=5, out=1),
        entry(dst="10.3.0.0/24", cookie=9, out=1),
    ]
    table = FlowTable(entries)
    table = apply_flow_mod(table, DELETE, cookie=5)
    assert len(table) == 1
    assert table.entries()[0].cookie == 9


def test_delete_restores_prior_table():
    base = FlowTable([entry(dst="10.1.0.0/24", cookie=1)])
    added = base.add(entry(dst="10.2.0.0/24", cookie=2)).add(entry(dst="10.3.0.0/24", cookie=2))
    assert added.delete_cookie(2) == base


_PREFIXES = [None, "10.1.0.0/24", "10.1.0.0/16", "10.3.0.0/24", "10.3.0.0/25", "0.0.0.0/0"]


@st.composite
def random_entry(draw):
    in_port = draw(st.sampled_from([None, 1, 2, 3, 4]))
    src = draw(st.sampled_from(_PREFIXES))
    dst = draw(st.sampled_from(_PREFIXES))
    if in_port is None and src is None and dst is None:
        in_port = 1
    return entry(
        prio=draw(st.integers(0, 300)),
        in_port=in_port,
        src=src,
        dst=dst,
        out=draw(st.integers(1, 4)),
        cookie=draw(st.integers(0, 50)),
    )


@settings(max_examples=200)
@given(
    entries=st.lists(random_entry(), max_size=12),
    src=st.sampled_from(["10.1.0.5", "10.3.0.5", "10.3.0.200", "192.0.2.1"]),
    dst=st.sampled_from(["10.1.0.5", "10.3.0.5", "10.3.0.200", "192.0.2.1"]),
    in_port=st.integers(1, 4),
)
def test_lookup_matches_brute_force(entries, src, dst, in_port):
    table = FlowTable(entries)
    got = table.lookup(src, dst, in_port)

    # Independent scan: max priority among matching entries, ties broken by
    # longest dst prefix, longest src prefix, smallest cookie hex.
    src_a, dst_a = ipaddress.IPv4Address(src), ipaddress.IPv4Address(dst)
    best = None
    for e in table.entries():
        m = e.match
        if m.in_port is not None and m.in_port != in_port:
            continue
        if m.ipv4_src is not None and src_a not in m.ipv4_src:
            continue
        if m.ipv4_dst is not None and dst_a not in m.ipv4_dst:
            continue
        if best is None:
            best = e
            continue
        def key(x):
            return (
                x.priority,
                x.match.ipv4_dst.prefixlen if x.match.ipv4_dst else -1,
                x.match.ipv4_src.prefixlen if x.match.ipv4_src else -1,
            )
        if key(e) > key(best) or (key(e) == key(best) and cookie_hex(e.cookie) < cookie_hex(best.cookie)):
            best = e
    assert got == best


def test_entry_wire_round_trip():
    e = entry(prio=123, in_port=2, src="10.1.0.0/24", dst="10.3.0.0/24", out=3, cookie=99)
    assert entry_from_wire(entry_to_wire(e)) == e


def install_path_flows(tables, topo, names_ports):
    """Helper: install forward flows along [(name, in_port, out_port)]."""
    for name, in_port, out_port in names_ports:
        dpid = topo.switch_by_name(name).dpid
        e = FlowEntry(
            priority=100,
            match=FlowMatch(
                in_port=in_port,
                ipv4_src=net("10.1.0.0/24"),
                ipv4_dst=net("10.3.0.0/24"),
            ),
            out_port=out_port,
            cookie=1,
        )
        tables[dpid] = tables.get(dpid, FlowTable()).add(e)
    return tables


def test_trace_delivers_along_installed_path(topo5):
    # Denver -> New York via s1, s2, s4, s3 (the least-latency route).
    tables = install_path_flows(
        {}, topo5, [("s1", 4, 1), ("s2", 1, 3), ("s4", 3, 2), ("s3", 2, 4)]
    )
    probe = PacketProbe.make("10.1.0.5", "10.3.0.5", ("s1", 4))
    result = trace_packet(tables, topo5, probe)
    assert result.outcome == DELIVERED
    assert result.hop_names(topo5) == ["s1", "s2", "s4", "s3"]
    assert result.hops[0].in_port == 4
    assert result.hops[-1].out_port == 4


def test_trace_empty_tables_drops(topo5):
    probe = PacketProbe.make("10.1.0.5", "10.3.0.5", ("s1", 4))
    assert trace_packet({}, topo5, probe).outcome == DROP


def test_trace_detects_loop(topo5):
    s1 = topo5.switch_by_name("s1").dpid
    s2 = topo5.switch_by_name("s2").dpid
    tables = {
        s1: FlowTable([entry(dst="10.3.0.0/24", out=1)]),
        s2: FlowTable([entry(dst="10.3.0.0/24", out=1)]),
    }
    probe = PacketProbe.make("10.1.0.5", "10.3.0.5", ("s1", 4))
    result = trace_packet(tables, topo5, probe)
    assert result.outcome == LOOP
    assert len(result.hops) <= len(topo5.switches)


def test_trace_terminates_on_random_tables(topo5):
    rng = random.Random(7)
    for _ in range(50):
        tables = {}
        for sw in topo5.switches:
            entries = []
            for _ in range(rng.randint(0, 3)):
                ports = sorted(sw.ports)
                entries.append(
                    entry(
                        prio=rng.randint(0, 200),
                        dst=rng.choice(["10.3.0.0/24", "10.1.0.0/24", "0.0.0.0/0"]),
                        out=rng.choice(ports),
                        cookie=rng.randint(0, 9),
                    )
                )
            tables[sw.dpid] = FlowTable(entries)
        probe = PacketProbe.make("10.1.0.5", "10.3.0.5", ("s1", 4))
        result = trace_packet(tables, topo5, probe)
        assert result.outcome in (DELIVERED, DROP, LOOP)
        assert len(result.hops) <= len(topo5.switches)


def test_port_configs_topo5(topo5):
    configs = port_configs(topo5, "s1")
    assert configs[1].latency_ms == 10.0 and configs[1].capacity_mbps == 1000
    assert configs[4].kind == "endpoint"
    assert configs[4].latency_ms == 0.0 and configs[4].capacity_mbps is None
