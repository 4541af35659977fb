"""Intent pipeline: resolve cities, select the best path under the requested
metric, synthesize per-switch flows, push and verify them, and persist the
result. Bandwidth demands are tracked as reservations against link capacity.
"""

from __future__ import annotations

import enum
import ipaddress
import logging
import math
import secrets
import threading
import time
import uuid
from dataclasses import dataclass
from typing import Mapping

from .dataplane import ADD, DELETE, FlowEntry, FlowMatch
from .southbound import LinkState, SouthboundError
from .store import Store, StoreError
from .topo import Dpid, Endpoint, Hop, LinkKey, Path, Topology, adjacency, path_links

log = logging.getLogger(__name__)

FLOW_PRIORITY = 100
PATH_CAP = 10_000

ACTIVE = "ACTIVE"
WITHDRAWN = "WITHDRAWN"


class IntentError(Exception):
    """Pipeline failure with a stable code for API/dialogue mapping."""

    def __init__(self, code: str, message: str, **details):
        super().__init__(message)
        self.code = code
        self.details = details


class IntentType(enum.Enum):
    LEAST_LATENCY = "least latency"
    HIGH_BANDWIDTH = "high bandwidth"
    LEAST_HOPCOUNT = "least hopcount"

    @property
    def phrase(self) -> str:
        return self.value

    @classmethod
    def parse(cls, text: str) -> "IntentType":
        cleaned = " ".join(str(text).lower().replace("_", " ").replace("-", " ").split())
        for member in cls:
            if cleaned in (member.value, member.name.lower().replace("_", " ")):
                return member
        raise IntentError(
            "BAD_INTENT_TYPE",
            f"unknown intent type {text!r}",
            valid=[m.value for m in cls],
        )


@dataclass(frozen=True)
class IntentRequest:
    intent_type: IntentType
    from_city: str
    to_city: str
    demand_mbps: float = 0.0


@dataclass(frozen=True)
class PathScore:
    latency_ms: float
    bottleneck_mbps: float  # residual: min over links of capacity - reserved
    hop_count: int


@dataclass
class IntentRecord:
    id: str
    request: IntentRequest
    path: Path
    flows: tuple[tuple[Dpid, FlowEntry], ...]
    cookie: int
    state: str
    created_at: float


@dataclass
class WithdrawOutcome:
    intent_id: str
    failed_switches: dict[str, str]  # dpid -> error code for partial deletes


def resolve_cities(request: IntentRequest, topology: Topology) -> tuple[Endpoint, Endpoint]:
    if request.from_city == request.to_city:
        raise IntentError("SAME_CITY", f"source and destination are both {request.from_city!r}")
    pair = []
    for city in (request.from_city, request.to_city):
        endpoint = topology.endpoint_by_city(city)
        if endpoint is None:
            raise IntentError(
                "UNKNOWN_CITY",
                f"unknown city {city!r}",
                city=city,
                known_cities=topology.cities(),
            )
        pair.append(endpoint)
    return pair[0], pair[1]


def enumerate_paths(
    topology: Topology,
    ingress: Endpoint,
    egress: Endpoint,
    cap: int = PATH_CAP,
) -> list[Path]:
    """All simple paths between the endpoints' switches, in lexicographic
    dpid-sequence order (adjacency is visited sorted)."""
    adj = adjacency(topology)
    src = topology.switch_by_name(ingress.switch).dpid
    dst = topology.switch_by_name(egress.switch).dpid
    results: list[Path] = []
    hops: list[list] = [[src, ingress.port, None]]
    visited = {src}

    def dfs(current: Dpid) -> None:
        if current == dst:
            hops[-1][2] = egress.port
            results.append(Path(hops=tuple(Hop(d, i, o) for d, i, o in hops), ingress=ingress, egress=egress))
            hops[-1][2] = None
            if len(results) > cap:
                raise IntentError("PATH_EXPLOSION", f"more than {cap} paths between {src} and {dst}")
            return
        for edge in adj[current]:
            if edge.neighbor in visited:
                continue
            hops[-1][2] = edge.local_port
            hops.append([edge.neighbor, edge.remote_port, None])
            visited.add(edge.neighbor)
            dfs(edge.neighbor)
            visited.remove(edge.neighbor)
            hops.pop()
            hops[-1][2] = None

    dfs(src)
    if not results:
        raise IntentError("NO_PATH", f"no path between {ingress.switch} and {egress.switch}")
    return results


def score_path(path: Path, link_state: Mapping[LinkKey, LinkState], topology: Topology) -> PathScore:
    latency = 0.0
    bottleneck = math.inf
    for link in path_links(topology, path):
        state = link_state.get(link.key())
        if state is None:
            raise IntentError("INCOMPLETE_STATE", f"no link state for {link.key()}")
        latency += state.latency_ms
        reserved = state.reserved_mbps if state.reserved_mbps is not None else 0.0
        bottleneck = min(bottleneck, max(0.0, state.capacity_mbps - reserved))
    return PathScore(latency_ms=latency, bottleneck_mbps=bottleneck, hop_count=len(path.hops) - 1)


def _selection_key(path: Path, score: PathScore, intent_type: IntentType, topology: Topology) -> tuple:
    # Tie-break chain shared with the oracle: metric, fewer hops, lower
    # latency, lexicographic dpid sequence, then link key sequence.
    if intent_type is IntentType.LEAST_LATENCY:
        primary = score.latency_ms
    elif intent_type is IntentType.HIGH_BANDWIDTH:
        primary = -score.bottleneck_mbps
    else:
        primary = score.hop_count
    dpid_seq = tuple(str(h.dpid) for h in path.hops)
    link_seq = tuple(l.key() for l in path_links(topology, path))
    return (primary, score.hop_count, score.latency_ms, dpid_seq, link_seq)


def select_best_path(
    paths: list[Path],
    scores: list[PathScore],
    intent_type: IntentType,
    topology: Topology,
) -> Path:
    if not paths or len(paths) != len(scores):
        raise ValueError("paths and scores must be non-empty and aligned")
    best = min(
        range(len(paths)),
        key=lambda i: _selection_key(paths[i], scores[i], intent_type, topology),
    )
    return paths[best]


def synthesize_flows(path: Path, cookie: int, priority: int = FLOW_PRIORITY) -> tuple[tuple[Dpid, FlowEntry], ...]:
    """Forward and reverse entries for every hop: 2 x |hops| in total."""
    src_net = path.ingress.prefix
    dst_net = path.egress.prefix
    out: list[tuple[Dpid, FlowEntry]] = []
    for hop in path.hops:
        forward = FlowEntry(
            priority=priority,
            match=FlowMatch(in_port=hop.in_port, ipv4_src=src_net, ipv4_dst=dst_net),
            out_port=hop.out_port,
            cookie=cookie,
        )
        reverse = FlowEntry(
            priority=priority,
            match=FlowMatch(in_port=hop.out_port, ipv4_src=dst_net, ipv4_dst=src_net),
            out_port=hop.in_port,
            cookie=cookie,
        )
        out.append((hop.dpid, forward))
        out.append((hop.dpid, reverse))
    return tuple(out)


def _row_links(topology: Topology, hops: list[dict]):
    """Links traversed by a stored hop list."""
    links = []
    for i in range(len(hops) - 1):
        name = topology.switch_by_dpid(Dpid.parse(hops[i]["dpid"])).name
        link = topology.link_at(name, hops[i]["out_port"])
        if link is not None:
            links.append(link)
    return links


class IntentEngine:
    """Single-writer engine owning path selection, reservations, flow pushes,
    and persistence. Reads are snapshots; writes serialize on one lock."""

    def __init__(self, topology: Topology, controller, store: Store):
        self.topology = topology
        self.controller = controller
        self.store = store
        self._lock = threading.RLock()
        self._reservations: dict[LinkKey, float] = {}
        self._rebuild_reservations()
        if hasattr(controller, "on_switch_ready"):
            controller.on_switch_ready = self._on_switch_ready

    # --- startup / reconciliation ---

    def _rebuild_reservations(self) -> None:
        self._reservations = {}
        for row in self.store.query_intents(state=ACTIVE):
            demand = row["demand_mbps"]
            if not demand:
                continue
            for link in _row_links(self.topology, row["hops"]):
                key = link.key()
                self._reservations[key] = self._reservations.get(key, 0.0) + demand

    def _on_switch_ready(self, dpid: Dpid) -> None:
        # Run off the session reader thread so replies keep flowing while we
        # hold the engine lock and issue requests.
        threading.Thread(target=self.reconcile_switch, args=(dpid,), daemon=True).start()

    def reconcile_switch(self, dpid: Dpid) -> None:
        """Bring a (re)connected switch in line with the committed state:
        drop flows of unknown cookies, re-push active flows and reservations."""
        with self._lock:
            try:
                name = self.topology.switch_by_dpid(dpid).name
            except KeyError:
                log.warning("connected switch %s is not in the topology", dpid)
                return
            active = self.store.query_intents(state=ACTIVE)
            active_cookies = {row["cookie"] for row in active}
            reservations = self._switch_reservations(name, self._reservations)
            try:
                installed = self.controller.flow_stats(dpid)
                for cookie in {e.cookie for e in installed} - active_cookies:
                    self.controller.push_flow(dpid, DELETE, cookie=cookie, reservations=reservations)
                pushed = False
                for row in active:
                    for flow in row["flows"]:
                        if flow["dpid"] != str(dpid):
                            continue
                        self.controller.push_flow(
                            dpid, ADD, entry=_flow_row_to_entry(flow), reservations=reservations
                        )
                        pushed = True
                if not pushed and reservations:
                    # No flows for this switch; refresh reservations alone
                    # via a no-op delete (cookie 0 is never allocated).
                    self.controller.push_flow(dpid, DELETE, cookie=0, reservations=reservations)
            except SouthboundError as exc:
                log.warning("reconcile of %s failed: %s", dpid, exc)

    # --- views ---

    def reservations_snapshot(self) -> dict[LinkKey, float]:
        with self._lock:
            return dict(self._reservations)

    def list_intents(self, state: str | None = None) -> list[dict]:
        return self.store.query_intents(state=state)

    def get_intent(self, intent_id: str) -> dict | None:
        return self.store.get_intent(intent_id)

    # --- helpers ---

    def _switch_reservations(self, name: str, reservations: dict[LinkKey, float]) -> dict[int, float]:
        """Absolute reserved mbps per link port of one switch."""
        out = {}
        for port in self.topology.switch_by_name(name).ports:
            link = self.topology.link_at(name, port)
            if link is not None:
                out[port] = reservations.get(link.key(), 0.0)
        return out

    def _new_cookie(self) -> int:
        taken = self.store.active_cookies()
        while True:
            cookie = secrets.randbits(63) | 1
            if cookie not in taken:
                return cookie

    def _entries_by_dpid(self, flows) -> dict[Dpid, list[FlowEntry]]:
        grouped: dict[Dpid, list[FlowEntry]] = {}
        for dpid, entry in flows:
            grouped.setdefault(dpid, []).append(entry)
        return grouped

    def _effective_link_state(self) -> Mapping[LinkKey, LinkState]:
        """Stats-reported link state; engine-known reservations fill in for
        links no live switch vouched for."""
        report = self.controller.collect_link_state(self.topology)
        state = {}
        for key, ls in report.states.items():
            reserved = ls.reserved_mbps if ls.reserved_mbps is not None else self._reservations.get(key, 0.0)
            state[key] = LinkState(ls.latency_ms, ls.capacity_mbps, reserved, ls.confirmed_ends)
        return state

    # --- the pipeline ---

    def execute_intent(self, request: IntentRequest) -> IntentRecord:
        with self._lock:
            ingress, egress = resolve_cities(request, self.topology)
            paths = enumerate_paths(self.topology, ingress, egress)
            link_state = self._effective_link_state()
            scores = [score_path(p, link_state, self.topology) for p in paths]
            viable = [i for i, s in enumerate(scores) if s.bottleneck_mbps >= request.demand_mbps]
            if not viable:
                raise IntentError(
                    "NO_PATH_MEETS_DEMAND",
                    f"no path from {request.from_city} to {request.to_city} has "
                    f"{request.demand_mbps} mbps available",
                )
            best = select_best_path(
                [paths[i] for i in viable],
                [scores[i] for i in viable],
                request.intent_type,
                self.topology,
            )

            old_row = self.store.active_intent_for_pair(request.from_city, request.to_city)
            cookie = self._new_cookie()
            flows = synthesize_flows(best, cookie)
            grouped = self._entries_by_dpid(flows)

            old_reservations = dict(self._reservations)
            new_reservations = dict(old_reservations)
            if old_row is not None and old_row["demand_mbps"]:
                for link in _row_links(self.topology, old_row["hops"]):
                    key = link.key()
                    new_reservations[key] = new_reservations.get(key, 0.0) - old_row["demand_mbps"]
            if request.demand_mbps:
                for link in path_links(self.topology, best):
                    key = link.key()
                    new_reservations[key] = new_reservations.get(key, 0.0) + request.demand_mbps
            new_reservations = {k: v for k, v in new_reservations.items() if v > 1e-9}

            # Push and verify switch by switch; any failure rolls back
            # everything already pushed under this cookie.
            attempted: list[Dpid] = []
            try:
                for dpid in best.dpids():
                    name = self.topology.switch_by_dpid(dpid).name
                    reservations = self._switch_reservations(name, new_reservations)
                    attempted.append(dpid)
                    for entry in grouped[dpid]:
                        self.controller.push_flow(dpid, ADD, entry=entry, reservations=reservations)
                    if not self.controller.verify_flows(dpid, cookie, grouped[dpid]):
                        raise IntentError("VERIFY_FAILED", f"flows not confirmed on {name}")
            except (SouthboundError, IntentError) as exc:
                self._rollback(attempted, cookie, old_row, old_reservations)
                if isinstance(exc, SouthboundError):
                    raise IntentError(exc.code, str(exc)) from exc
                raise

            record = IntentRecord(
                id=uuid.uuid4().hex,
                request=request,
                path=best,
                flows=flows,
                cookie=cookie,
                state=ACTIVE,
                created_at=time.time(),
            )
            try:
                self.store.commit_intent(
                    _record_to_row(record),
                    [_flow_to_row(dpid, e) for dpid, e in flows],
                    superseded_id=old_row["id"] if old_row is not None else None,
                )
            except StoreError as exc:
                self._rollback(attempted, cookie, old_row, old_reservations)
                raise IntentError("STORE_REJECTED", str(exc)) from exc

            self._reservations = new_reservations

            # Remove the superseded intent's remaining flows; stale entries on
            # unreachable switches are cleaned up on reconnect.
            if old_row is not None:
                for dpid_text in {f["dpid"] for f in old_row["flows"]}:
                    dpid = Dpid.parse(dpid_text)
                    name = self.topology.switch_by_dpid(dpid).name
                    try:
                        self.controller.push_flow(
                            dpid,
                            DELETE,
                            cookie=old_row["cookie"],
                            reservations=self._switch_reservations(name, new_reservations),
                        )
                    except SouthboundError as exc:
                        log.warning("supersede cleanup on %s failed: %s", name, exc)
            return record

    def _rollback(
        self,
        dpids: list[Dpid],
        cookie: int,
        old_row: dict | None,
        old_reservations: dict[LinkKey, float],
    ) -> None:
        """Best-effort removal of everything pushed under ``cookie`` and
        restoration of overwritten superseded entries and reservations."""
        old_flows = old_row["flows"] if old_row is not None else []
        for dpid in dpids:
            name = self.topology.switch_by_dpid(dpid).name
            reservations = self._switch_reservations(name, old_reservations)
            try:
                self.controller.push_flow(dpid, DELETE, cookie=cookie, reservations=reservations)
                for flow in old_flows:
                    if flow["dpid"] == str(dpid):
                        self.controller.push_flow(
                            dpid, ADD, entry=_flow_row_to_entry(flow), reservations=reservations
                        )
            except SouthboundError as exc:
                log.warning("rollback on %s incomplete: %s", name, exc)

    def withdraw_intent(self, intent_id: str) -> WithdrawOutcome:
        with self._lock:
            row = self.store.get_intent(intent_id)
            if row is None:
                raise IntentError("NOT_FOUND", f"no intent {intent_id}")
            if row["state"] != ACTIVE:
                raise IntentError("ALREADY_WITHDRAWN", f"intent {intent_id} is not active")

            new_reservations = dict(self._reservations)
            if row["demand_mbps"]:
                for link in _row_links(self.topology, row["hops"]):
                    key = link.key()
                    remaining = new_reservations.get(key, 0.0) - row["demand_mbps"]
                    if remaining > 1e-9:
                        new_reservations[key] = remaining
                    else:
                        new_reservations.pop(key, None)

            self.store.mark_withdrawn(intent_id)
            failed: dict[str, str] = {}
            for dpid_text in {f["dpid"] for f in row["flows"]}:
                dpid = Dpid.parse(dpid_text)
                name = self.topology.switch_by_dpid(dpid).name
                try:
                    self.controller.push_flow(
                        dpid,
                        DELETE,
                        cookie=row["cookie"],
                        reservations=self._switch_reservations(name, new_reservations),
                    )
                except SouthboundError as exc:
                    failed[dpid_text] = exc.code
            self._reservations = new_reservations
            return WithdrawOutcome(intent_id=intent_id, failed_switches=failed)


# --- row conversions (store speaks plain dicts) ---


def _record_to_row(record: IntentRecord) -> dict:
    return {
        "id": record.id,
        "intent_type": record.request.intent_type.value,
        "from_city": record.request.from_city,
        "to_city": record.request.to_city,
        "demand_mbps": record.request.demand_mbps,
        "cookie": record.cookie,
        "state": record.state,
        "created_at": record.created_at,
        "hops": [
            {"dpid": str(h.dpid), "in_port": h.in_port, "out_port": h.out_port}
            for h in record.path.hops
        ],
    }


def _flow_to_row(dpid: Dpid, entry: FlowEntry) -> dict:
    return {
        "dpid": str(dpid),
        "priority": entry.priority,
        "in_port": entry.match.in_port,
        "ipv4_src": str(entry.match.ipv4_src) if entry.match.ipv4_src else None,
        "ipv4_dst": str(entry.match.ipv4_dst) if entry.match.ipv4_dst else None,
        "out_port": entry.out_port,
        "cookie": entry.cookie,
    }


def _flow_row_to_entry(row: dict) -> FlowEntry:
    def net(value):
        return ipaddress.IPv4Network(value) if value else None

    return FlowEntry(
        priority=row["priority"],
        match=FlowMatch(in_port=row["in_port"], ipv4_src=net(row["ipv4_src"]), ipv4_dst=net(row["ipv4_dst"])),
        out_port=row["out_port"],
        cookie=row["cookie"],
    )
