"""Controller/switch wire protocol and the controller-side session registry.

Frames are a 4-byte big-endian length prefix followed by a UTF-8 JSON body
with a "type" discriminator. The controller keeps at most one READY session
per datapath id and exposes the flow push / verify / stats primitives the
intent engine builds on.
"""

from __future__ import annotations

import json
import logging
import socket
import struct
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .dataplane import FlowEntry, entry_from_wire, entry_to_wire
from .topo import Dpid, LinkKey, Topology

log = logging.getLogger(__name__)

MAX_FRAME_BYTES = 1 << 20
DEFAULT_PORT = 6653

HANDSHAKING = "handshaking"
READY = "ready"
DEAD = "dead"


class ProtocolError(Exception):
    """Malformed frame or message; the session carrying it is closed."""


class FrameTooLarge(ProtocolError):
    pass


class SouthboundError(Exception):
    code = "SOUTHBOUND_ERROR"


class SwitchUnreachable(SouthboundError):
    code = "SWITCH_UNREACHABLE"


class PushTimeout(SouthboundError):
    code = "PUSH_TIMEOUT"


class PushRejected(SouthboundError):
    code = "PUSH_REJECTED"


class LinkStateInconsistent(SouthboundError):
    code = "INCONSISTENT_LINK_STATE"


# --- message bodies ---


@dataclass(frozen=True)
class Hello:
    dpid: str
    ports: tuple[int, ...]


@dataclass(frozen=True)
class EchoRequest:
    pass


@dataclass(frozen=True)
class EchoReply:
    pass


@dataclass(frozen=True)
class FlowMod:
    command: str  # "add" | "delete"
    entry: FlowEntry | None = None
    cookie: int | None = None
    # Absolute per-port reserved bandwidth pushed alongside the flows of an
    # intent so switch port stats can echo the controller's reservations.
    reservations: dict[int, float] | None = None


@dataclass(frozen=True)
class FlowModAck:
    pass


@dataclass(frozen=True)
class StatsRequest:
    kind: str  # "port" | "flow"


@dataclass(frozen=True)
class PortStat:
    kind: str  # "link" | "endpoint"
    latency_ms: float
    capacity_mbps: float | None
    reserved_mbps: float
    tx: int
    rx: int
    peer: str


@dataclass(frozen=True)
class StatsReply:
    kind: str
    flows: tuple[FlowEntry, ...] | None = None
    ports: dict[int, PortStat] | None = None


@dataclass(frozen=True)
class Error:
    code: str
    text: str


Body = Hello | EchoRequest | EchoReply | FlowMod | FlowModAck | StatsRequest | StatsReply | Error


@dataclass(frozen=True)
class Message:
    xid: int
    body: Body


def _port_stat_to_wire(stat: PortStat) -> dict:
    return {
        "kind": stat.kind,
        "latency_ms": stat.latency_ms,
        "capacity_mbps": stat.capacity_mbps,
        "reserved_mbps": stat.reserved_mbps,
        "tx": stat.tx,
        "rx": stat.rx,
        "peer": stat.peer,
    }


def _port_stat_from_wire(data: dict) -> PortStat:
    return PortStat(
        kind=data["kind"],
        latency_ms=data["latency_ms"],
        capacity_mbps=data["capacity_mbps"],
        reserved_mbps=data["reserved_mbps"],
        tx=data["tx"],
        rx=data["rx"],
        peer=data["peer"],
    )


def _body_to_wire(body: Body) -> dict:
    if isinstance(body, Hello):
        return {"type": "hello", "dpid": body.dpid, "ports": list(body.ports)}
    if isinstance(body, EchoRequest):
        return {"type": "echo_req"}
    if isinstance(body, EchoReply):
        return {"type": "echo_rep"}
    if isinstance(body, FlowMod):
        return {
            "type": "flow_mod",
            "command": body.command,
            "entry": entry_to_wire(body.entry) if body.entry is not None else None,
            "cookie": body.cookie,
            "reservations": (
                {str(p): v for p, v in sorted(body.reservations.items())}
                if body.reservations is not None
                else None
            ),
        }
    if isinstance(body, FlowModAck):
        return {"type": "flow_mod_ack"}
    if isinstance(body, StatsRequest):
        return {"type": "stats_req", "kind": body.kind}
    if isinstance(body, StatsReply):
        wire: dict = {"type": "stats_rep", "kind": body.kind}
        if body.kind == "flow":
            wire["flows"] = [entry_to_wire(e) for e in (body.flows or ())]
        else:
            wire["ports"] = {str(p): _port_stat_to_wire(s) for p, s in sorted((body.ports or {}).items())}
        return wire
    if isinstance(body, Error):
        return {"type": "error", "code": body.code, "text": body.text}
    raise ProtocolError(f"cannot encode body {body!r}")


def _body_from_wire(data: dict) -> Body:
    kind = data.get("type")
    try:
        if kind == "hello":
            return Hello(dpid=data["dpid"], ports=tuple(data["ports"]))
        if kind == "echo_req":
            return EchoRequest()
        if kind == "echo_rep":
            return EchoReply()
        if kind == "flow_mod":
            raw_res = data.get("reservations")
            return FlowMod(
                command=data["command"],
                entry=entry_from_wire(data["entry"]) if data.get("entry") is not None else None,
                cookie=data.get("cookie"),
                reservations={int(p): float(v) for p, v in raw_res.items()} if raw_res is not None else None,
            )
        if kind == "flow_mod_ack":
            return FlowModAck()
        if kind == "stats_req":
            return StatsRequest(kind=data["kind"])
        if kind == "stats_rep":
            if data["kind"] == "flow":
                return StatsReply(kind="flow", flows=tuple(entry_from_wire(e) for e in data["flows"]))
            return StatsReply(
                kind="port",
                ports={int(p): _port_stat_from_wire(s) for p, s in data["ports"].items()},
            )
        if kind == "error":
            return Error(code=data["code"], text=data["text"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ProtocolError(f"malformed {kind!r} message: {exc}") from exc
    raise ProtocolError(f"unknown message type: {kind!r}")


def encode_frame(message: Message) -> bytes:
    wire = _body_to_wire(message.body)
    wire["xid"] = message.xid
    payload = json.dumps(wire, separators=(",", ":")).encode("utf-8")
    if len(payload) > MAX_FRAME_BYTES:
        raise FrameTooLarge(f"frame of {len(payload)} bytes exceeds {MAX_FRAME_BYTES}")
    return struct.pack("!I", len(payload)) + payload


def decode_frame(data: bytes) -> tuple[Message, int]:
    """Decode one frame from the head of ``data``; returns (message, consumed)."""
    if len(data) < 4:
        raise ValueError("incomplete frame header")
    (length,) = struct.unpack("!I", data[:4])
    if length > MAX_FRAME_BYTES:
        raise FrameTooLarge(f"declared frame length {length} exceeds {MAX_FRAME_BYTES}")
    if len(data) < 4 + length:
        raise ValueError("incomplete frame body")
    payload = data[4 : 4 + length]
    try:
        wire = json.loads(payload.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProtocolError(f"frame body is not valid JSON: {exc}") from exc
    if not isinstance(wire, dict):
        raise ProtocolError("frame body must be a JSON object")
    xid = wire.get("xid")
    if not isinstance(xid, int):
        raise ProtocolError("frame body missing integer xid")
    return Message(xid=xid, body=_body_from_wire(wire)), 4 + length


class FrameDecoder:
    """Incremental decoder for a byte stream of frames."""

    def __init__(self):
        self._buf = bytearray()

    def feed(self, data: bytes) -> list[Message]:
        self._buf.extend(data)
        messages = []
        while True:
            if len(self._buf) < 4:
                return messages
            (length,) = struct.unpack("!I", bytes(self._buf[:4]))
            if length > MAX_FRAME_BYTES:
                raise FrameTooLarge(f"declared frame length {length} exceeds {MAX_FRAME_BYTES}")
            if len(self._buf) < 4 + length:
                return messages
            message, consumed = decode_frame(bytes(self._buf))
            del self._buf[:consumed]
            messages.append(message)


def send_message(sock: socket.socket, message: Message) -> None:
    sock.sendall(encode_frame(message))


# --- controller side ---


class _Pending:
    __slots__ = ("event", "reply")

    def __init__(self):
        self.event = threading.Event()
        self.reply: Body | None = None


class SwitchSession:
    """One connected switch: a reader loop plus xid-correlated requests."""

    def __init__(self, controller: "Controller", sock: socket.socket, addr):
        self.controller = controller
        self.sock = sock
        self.addr = addr
        self.dpid: Dpid | None = None
        self.ports: tuple[int, ...] = ()
        self.state = HANDSHAKING
        self.outstanding_echoes = 0
        self.last_echo = time.monotonic()
        self._xid = 0
        self._xid_lock = threading.Lock()
        self._write_lock = threading.Lock()
        self._pending: dict[int, _Pending] = {}
        self._pending_lock = threading.Lock()
        self._closed = threading.Event()
        self._thread = threading.Thread(target=self._run, name="sb-session", daemon=True)

    def start(self) -> None:
        self._thread.start()

    def _next_xid(self) -> int:
        with self._xid_lock:
            self._xid = (self._xid + 1) & 0xFFFFFFFF
            return self._xid

    def send(self, body: Body, xid: int | None = None) -> int:
        xid = self._next_xid() if xid is None else xid
        data = encode_frame(Message(xid=xid, body=body))
        with self._write_lock:
            self.sock.sendall(data)
        return xid

    def request(self, body: Body, timeout: float) -> Body:
        """Send and wait for the reply carrying the same xid."""
        pending = _Pending()
        xid = self._next_xid()
        with self._pending_lock:
            self._pending[xid] = pending
        try:
            try:
                self.send(body, xid=xid)
            except OSError as exc:
                raise SwitchUnreachable(f"send to {self.dpid} failed: {exc}") from exc
            if not pending.event.wait(timeout):
                raise PushTimeout(f"no reply from {self.dpid} within {timeout}s")
            if pending.reply is None:
                raise SwitchUnreachable(f"session to {self.dpid} closed")
            return pending.reply
        finally:
            with self._pending_lock:
                self._pending.pop(xid, None)

    def _resolve(self, xid: int, body: Body | None) -> None:
        with self._pending_lock:
            pending = self._pending.get(xid)
        if pending is not None:
            pending.reply = body
            pending.event.set()

    def _run(self) -> None:
        decoder = FrameDecoder()
        deadline = time.monotonic() + self.controller.hello_timeout
        try:
            while not self._closed.is_set():
                if self.state == HANDSHAKING and time.monotonic() > deadline:
                    log.info("no hello from %s within %.1fs", self.addr, self.controller.hello_timeout)
                    break
                self.sock.settimeout(0.2)
                try:
                    data = self.sock.recv(65536)
                except socket.timeout:
                    continue
                except OSError:
                    break
                if not data:
                    break
                for message in decoder.feed(data):
                    self._dispatch(message)
        except ProtocolError as exc:
            log.warning("protocol error from %s: %s", self.dpid or self.addr, exc)
        finally:
            self.close("reader exit")

    def _dispatch(self, message: Message) -> None:
        body = message.body
        if self.state == HANDSHAKING:
            if not isinstance(body, Hello):
                raise ProtocolError(f"expected hello, got {type(body).__name__}")
            self.dpid = Dpid.parse(body.dpid)
            self.ports = body.ports
            self.controller._register(self)
            return
        if isinstance(body, EchoReply):
            self.outstanding_echoes = 0
            self.last_echo = time.monotonic()
            return
        if isinstance(body, EchoRequest):
            try:
                self.send(EchoReply(), xid=message.xid)
            except OSError:
                pass
            return
        if isinstance(body, Hello):
            log.warning("unexpected second hello from %s", self.dpid)
            return
        self._resolve(message.xid, body)

    def close(self, reason: str) -> None:
        if self._closed.is_set():
            return
        self._closed.set()
        self.state = DEAD
        with self._pending_lock:
            pending = list(self._pending.values())
        for p in pending:
            p.reply = None
            p.event.set()
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        try:
            self.sock.close()
        except OSError:
            pass
        self.controller._deregister(self, reason)


@dataclass(frozen=True)
class LinkState:
    latency_ms: float
    capacity_mbps: float
    reserved_mbps: float | None  # None when no live end reported it
    confirmed_ends: int


@dataclass
class LinkStateReport:
    states: dict[LinkKey, LinkState]
    partial: set[LinkKey]

    def complete(self) -> bool:
        return not self.partial


class Controller:
    """Southbound listener and session registry."""

    def __init__(
        self,
        host: str = "127.0.0.1",
        port: int = DEFAULT_PORT,
        *,
        hello_timeout: float = 5.0,
        echo_interval: float = 10.0,
        max_echo_misses: int = 3,
        push_timeout: float = 2.0,
    ):
        self.host = host
        self.port = port
        self.hello_timeout = hello_timeout
        self.echo_interval = echo_interval
        self.max_echo_misses = max_echo_misses
        self.push_timeout = push_timeout
        self.on_switch_ready = None  # callable(Dpid) | None
        self._sessions: dict[Dpid, SwitchSession] = {}
        self._lock = threading.Lock()
        self._listener: socket.socket | None = None
        self._stop = threading.Event()
        self._threads: list[threading.Thread] = []

    # --- lifecycle ---

    def start(self) -> int:
        sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        sock.bind((self.host, self.port))
        sock.listen(64)
        sock.settimeout(0.2)
        self._listener = sock
        self.port = sock.getsockname()[1]
        accept = threading.Thread(target=self._accept_loop, name="sb-accept", daemon=True)
        echo = threading.Thread(target=self._echo_loop, name="sb-echo", daemon=True)
        accept.start()
        echo.start()
        self._threads = [accept, echo]
        log.info("southbound listening on %s:%d", self.host, self.port)
        return self.port

    def stop(self) -> None:
        self._stop.set()
        if self._listener is not None:
            try:
                self._listener.close()
            except OSError:
                pass
        with self._lock:
            sessions = list(self._sessions.values())
        for session in sessions:
            session.close("controller stopped")
        for thread in self._threads:
            thread.join(timeout=2)

    def _accept_loop(self) -> None:
        assert self._listener is not None
        while not self._stop.is_set():
            try:
                sock, addr = self._listener.accept()
            except socket.timeout:
                continue
            except OSError:
                return
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            SwitchSession(self, sock, addr).start()

    def _echo_loop(self) -> None:
        while not self._stop.wait(self.echo_interval):
            with self._lock:
                sessions = list(self._sessions.values())
            for session in sessions:
                if session.state != READY:
                    continue
                if session.outstanding_echoes >= self.max_echo_misses:
                    log.warning("switch %s missed %d echoes, closing", session.dpid, session.outstanding_echoes)
                    session.close("echo timeout")
                    continue
                session.outstanding_echoes += 1
                try:
                    session.send(EchoRequest())
                except OSError:
                    session.close("echo send failed")

    def _register(self, session: SwitchSession) -> None:
        assert session.dpid is not None
        with self._lock:
            old = self._sessions.get(session.dpid)
            self._sessions[session.dpid] = session
        if old is not None and old is not session:
            old.close("superseded by new connection")
        session.state = READY
        log.info("switch %s ready (%d ports)", session.dpid, len(session.ports))
        callback = self.on_switch_ready
        if callback is not None:
            try:
                callback(session.dpid)
            except Exception:
                log.exception("on_switch_ready callback failed for %s", session.dpid)

    def _deregister(self, session: SwitchSession, reason: str) -> None:
        if session.dpid is None:
            return
        with self._lock:
            if self._sessions.get(session.dpid) is session:
                del self._sessions[session.dpid]
                log.info("switch %s gone (%s)", session.dpid, reason)

    # --- registry views ---

    def ready_dpids(self) -> set[Dpid]:
        with self._lock:
            return {d for d, s in self._sessions.items() if s.state == READY}

    def is_ready(self, dpid: Dpid) -> bool:
        with self._lock:
            session = self._sessions.get(dpid)
        return session is not None and session.state == READY

    def _session(self, dpid: Dpid) -> SwitchSession:
        with self._lock:
            session = self._sessions.get(dpid)
        if session is None or session.state != READY:
            raise SwitchUnreachable(f"no ready session for {dpid}")
        return session

    # --- primitives used by the intent engine ---

    def push_flow(
        self,
        dpid: Dpid,
        command: str,
        *,
        entry: FlowEntry | None = None,
        cookie: int | None = None,
        reservations: dict[int, float] | None = None,
        timeout: float | None = None,
    ) -> None:
        session = self._session(dpid)
        body = FlowMod(command=command, entry=entry, cookie=cookie, reservations=reservations)
        reply = session.request(body, timeout or self.push_timeout)
        if isinstance(reply, Error):
            raise PushRejected(f"switch {dpid} rejected flow-mod: {reply.code}: {reply.text}")
        if not isinstance(reply, FlowModAck):
            raise ProtocolError(f"unexpected reply to flow-mod: {type(reply).__name__}")

    def flow_stats(self, dpid: Dpid, timeout: float | None = None) -> tuple[FlowEntry, ...]:
        session = self._session(dpid)
        reply = session.request(StatsRequest(kind="flow"), timeout or self.push_timeout)
        if isinstance(reply, Error):
            raise PushRejected(f"stats request rejected: {reply.code}: {reply.text}")
        if not isinstance(reply, StatsReply) or reply.kind != "flow":
            raise ProtocolError("unexpected reply to flow stats request")
        return reply.flows or ()

    def port_stats(self, dpid: Dpid, timeout: float | None = None) -> dict[int, PortStat]:
        session = self._session(dpid)
        reply = session.request(StatsRequest(kind="port"), timeout or self.push_timeout)
        if isinstance(reply, Error):
            raise PushRejected(f"stats request rejected: {reply.code}: {reply.text}")
        if not isinstance(reply, StatsReply) or reply.kind != "port":
            raise ProtocolError("unexpected reply to port stats request")
        return reply.ports or {}

    def verify_flows(self, dpid: Dpid, cookie: int, expected: list[FlowEntry]) -> bool:
        """True iff every expected entry tagged with the cookie is installed."""
        installed = {e for e in self.flow_stats(dpid) if e.cookie == cookie}
        return all(e in installed for e in expected)

    def collect_link_state(self, topology: Topology) -> LinkStateReport:
        """Merge per-port stats from both ends of every link.

        Links with fewer than two live ends are flagged partial; their
        configured attributes fall back to the topology file. Live ends
        must agree on configured attributes.
        """
        ready = self.ready_dpids()
        reports: dict[Dpid, dict[int, PortStat]] = {}

        def fetch(dpid: Dpid):
            try:
                return dpid, self.port_stats(dpid)
            except SouthboundError:
                return dpid, None

        targets = [s.dpid for s in topology.switches if s.dpid in ready]
        if targets:
            with ThreadPoolExecutor(max_workers=min(8, len(targets))) as pool:
                for dpid, stats in pool.map(fetch, targets):
                    if stats is not None:
                        reports[dpid] = stats

        states: dict[LinkKey, LinkState] = {}
        partial: set[LinkKey] = set()
        for link in topology.links:
            ends = []
            for name, port in (link.a, link.b):
                dpid = topology.switch_by_name(name).dpid
                stats = reports.get(dpid)
                if stats is not None and port in stats:
                    ends.append(stats[port])
            if len(ends) == 2:
                first, second = ends
                if (first.latency_ms, first.capacity_mbps) != (second.latency_ms, second.capacity_mbps):
                    raise LinkStateInconsistent(
                        f"link {link.key()} ends disagree: "
                        f"({first.latency_ms}, {first.capacity_mbps}) vs "
                        f"({second.latency_ms}, {second.capacity_mbps})"
                    )
                states[link.key()] = LinkState(
                    latency_ms=first.latency_ms,
                    capacity_mbps=first.capacity_mbps,
                    reserved_mbps=max(first.reserved_mbps, second.reserved_mbps),
                    confirmed_ends=2,
                )
            elif len(ends) == 1:
                stat = ends[0]
                states[link.key()] = LinkState(
                    latency_ms=stat.latency_ms,
                    capacity_mbps=stat.capacity_mbps,
                    reserved_mbps=stat.reserved_mbps,
                    confirmed_ends=1,
                )
                partial.add(link.key())
            else:
                states[link.key()] = LinkState(
                    latency_ms=link.latency_ms,
                    capacity_mbps=link.capacity_mbps,
                    reserved_mbps=None,
                    confirmed_ends=0,
                )
                partial.add(link.key())
        return LinkStateReport(states=states, partial=partial)
