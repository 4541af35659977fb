"""Simulated switches: flow-table holders that speak the southbound protocol.

A fleet runs every switch of a topology (or a subset) in one process, each
with its own connection to the controller. Flow state survives loss of the
control channel; probes are answered from the last-known tables.
"""

from __future__ import annotations

import logging
import socket
import threading

from . import southbound as sb
from .dataplane import (
    ADD,
    DELETE,
    FlowTable,
    PacketProbe,
    PortConfig,
    TraceResult,
    port_configs,
    trace_packet,
)
from .topo import Dpid, Switch, Topology

log = logging.getLogger(__name__)


class SwitchSim:
    """One simulated switch: flow table, port attributes, probe counters."""

    def __init__(self, switch: Switch, ports: dict[int, PortConfig]):
        self.switch = switch
        self.port_config = ports
        self.table = FlowTable()
        self._lock = threading.Lock()
        self._reserved: dict[int, float] = {p: 0.0 for p in switch.ports}
        self._tx: dict[int, int] = {p: 0 for p in switch.ports}
        self._rx: dict[int, int] = {p: 0 for p in switch.ports}

    @property
    def dpid(self) -> Dpid:
        return self.switch.dpid

    @property
    def name(self) -> str:
        return self.switch.name

    def handle_body(self, body: sb.Body) -> sb.Body:
        """Protocol logic for one inbound message; returns the reply body."""
        if isinstance(body, sb.EchoRequest):
            return sb.EchoReply()
        if isinstance(body, sb.FlowMod):
            return self._handle_flow_mod(body)
        if isinstance(body, sb.StatsRequest):
            if body.kind == "flow":
                return sb.StatsReply(kind="flow", flows=self.table.entries())
            if body.kind == "port":
                return sb.StatsReply(kind="port", ports=self.port_stats())
            return sb.Error(code="bad_stats_kind", text=f"unknown stats kind {body.kind!r}")
        return sb.Error(code="unsupported", text=f"cannot handle {type(body).__name__}")

    def _handle_flow_mod(self, mod: sb.FlowMod) -> sb.Body:
        with self._lock:
            if mod.command == ADD:
                if mod.entry is None:
                    return sb.Error(code="bad_flow_mod", text="add without entry")
                if mod.entry.out_port not in self.switch.ports:
                    return sb.Error(
                        code="bad_out_port",
                        text=f"switch {self.name} has no port {mod.entry.out_port}",
                    )
                self.table = self.table.add(mod.entry)
            elif mod.command == DELETE:
                if mod.cookie is None:
                    return sb.Error(code="bad_flow_mod", text="delete without cookie filter")
                self.table = self.table.delete_cookie(mod.cookie)
            else:
                return sb.Error(code="bad_flow_mod", text=f"unknown command {mod.command!r}")
            if mod.reservations:
                for port, value in mod.reservations.items():
                    if port in self._reserved:
                        self._reserved[port] = value
        return sb.FlowModAck()

    def port_stats(self) -> dict[int, sb.PortStat]:
        with self._lock:
            stats = {}
            for port in sorted(self.switch.ports):
                config = self.port_config[port]
                stats[port] = sb.PortStat(
                    kind=config.kind,
                    latency_ms=config.latency_ms,
                    capacity_mbps=config.capacity_mbps,
                    reserved_mbps=self._reserved.get(port, 0.0),
                    tx=self._tx.get(port, 0),
                    rx=self._rx.get(port, 0),
                    peer=config.peer,
                )
            return stats

    def count_probe(self, in_port: int, out_port: int) -> None:
        with self._lock:
            self._rx[in_port] = self._rx.get(in_port, 0) + 1
            self._tx[out_port] = self._tx.get(out_port, 0) + 1


class SwitchConnector:
    """TCP client keeping one switch connected to the controller."""

    def __init__(self, sim: SwitchSim, host: str, port: int, *, reconnect: bool = False):
        self.sim = sim
        self.host = host
        self.port = port
        self.reconnect = reconnect
        self._sock: socket.socket | None = None
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._run, name=f"switch-{sim.name}", daemon=True)

    def start(self) -> None:
        self._stop.clear()
        if not self._thread.is_alive():
            self._thread = threading.Thread(target=self._run, name=f"switch-{self.sim.name}", daemon=True)
            self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        sock = self._sock
        if sock is not None:
            try:
                sock.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            try:
                sock.close()
            except OSError:
                pass
        self._thread.join(timeout=2)

    def _run(self) -> None:
        while not self._stop.is_set():
            try:
                self._serve_once()
            except OSError as exc:
                log.debug("switch %s connection error: %s", self.sim.name, exc)
            if not self.reconnect:
                return
            self._stop.wait(0.5)

    def _serve_once(self) -> None:
        sock = socket.create_connection((self.host, self.port), timeout=5)
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self._sock = sock
        decoder = sb.FrameDecoder()
        write_lock = threading.Lock()
        hello = sb.Hello(dpid=str(self.sim.dpid), ports=tuple(sorted(self.sim.switch.ports)))
        with write_lock:
            sb.send_message(sock, sb.Message(xid=0, body=hello))
        sock.settimeout(0.2)
        try:
            while not self._stop.is_set():
                try:
                    data = sock.recv(65536)
                except socket.timeout:
                    continue
                if not data:
                    return
                for message in decoder.feed(data):
                    reply = self.sim.handle_body(message.body)
                    with write_lock:
                        sb.send_message(sock, sb.Message(xid=message.xid, body=reply))
        except (sb.ProtocolError, OSError) as exc:
            log.debug("switch %s session ended: %s", self.sim.name, exc)
        finally:
            try:
                sock.close()
            except OSError:
                pass
            self._sock = None


class SwitchFleet:
    """All simulated switches of a topology plus probe injection."""

    def __init__(
        self,
        topology: Topology,
        controller_host: str,
        controller_port: int,
        *,
        only: set[str] | None = None,
        reconnect: bool = False,
    ):
        self.topology = topology
        self.sims: dict[str, SwitchSim] = {}
        self._connectors: dict[str, SwitchConnector] = {}
        for switch in topology.switches:
            if only is not None and switch.name not in only:
                continue
            sim = SwitchSim(switch, port_configs(topology, switch.name))
            self.sims[switch.name] = sim
            self._connectors[switch.name] = SwitchConnector(
                sim, controller_host, controller_port, reconnect=reconnect
            )

    def start(self) -> None:
        for connector in self._connectors.values():
            connector.start()

    def stop(self) -> None:
        for connector in self._connectors.values():
            connector.stop()

    def stop_switch(self, name: str) -> None:
        self._connectors[name].stop()

    def restart_switch(self, name: str) -> None:
        self._connectors[name].start()

    def sim(self, name: str) -> SwitchSim:
        return self.sims[name]

    def snapshot_tables(self) -> dict[Dpid, FlowTable]:
        """Point-in-time copy of every flow table (tables are immutable)."""
        return {sim.dpid: sim.table for sim in self.sims.values()}

    def inject_probe(self, probe: PacketProbe) -> TraceResult:
        """Trace a probe over the current tables and bump port counters."""
        result = trace_packet(self.snapshot_tables(), self.topology, probe)
        by_dpid = {sim.dpid: sim for sim in self.sims.values()}
        for hop in result.hops:
            sim = by_dpid.get(hop.dpid)
            if sim is not None:
                sim.count_probe(hop.in_port, hop.out_port)
        return result
