"""Northbound HTTP surface: login, topology extraction, intent CRUD, the
dialogue webhook, and static hosting for the bundled web UI."""

from __future__ import annotations

import hmac
import json
import logging
import mimetypes
import os
import re
import ssl
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .dataplane import FlowTable, PacketProbe, trace_packet
from .dialogue import DialogueManager, WebhookError
from .engine import IntentEngine, IntentError, IntentRequest, IntentType
from .southbound import SouthboundError
from .store import Store
from .topo import Dpid, Topology

log = logging.getLogger(__name__)

DEFAULT_PORT = 8080
TOKEN_TTL_S = 12 * 3600

ERROR_STATUS = {
    "BAD_INTENT_TYPE": 400,
    "SAME_CITY": 400,
    "UNKNOWN_CITY": 404,
    "NOT_FOUND": 404,
    "NO_PATH": 409,
    "NO_PATH_MEETS_DEMAND": 409,
    "PATH_EXPLOSION": 409,
    "ALREADY_WITHDRAWN": 409,
    "SWITCH_UNREACHABLE": 502,
    "PUSH_TIMEOUT": 502,
    "PUSH_REJECTED": 502,
    "VERIFY_FAILED": 502,
    "INCOMPLETE_STATE": 502,
    "STORE_REJECTED": 500,
}

_INTENT_PATH = re.compile(r"^/api/intents/([0-9a-f]+)/path$")
_INTENT_ID = re.compile(r"^/api/intents/([0-9a-f]+)$")


def record_json(row: dict, topology: Topology) -> dict:
    """Wire shape of one intent record, hop list and highlight edges included."""
    hops = [
        {
            "switch": topology.switch_by_dpid(Dpid.parse(h["dpid"])).name,
            "dpid": h["dpid"],
            "in_port": h["in_port"],
            "out_port": h["out_port"],
        }
        for h in row["hops"]
    ]
    edges = [
        {
            "source": hops[i]["switch"],
            "target": hops[i + 1]["switch"],
            "src_port": hops[i]["out_port"],
            "dst_port": hops[i + 1]["in_port"],
        }
        for i in range(len(hops) - 1)
    ]
    return {
        "id": row["id"],
        "intent_type": row["intent_type"],
        "from_city": row["from_city"],
        "to_city": row["to_city"],
        "demand_mbps": row["demand_mbps"],
        "cookie": row["cookie"],
        "state": row["state"],
        "created_at": row["created_at"],
        "path": {"hops": hops, "edges": edges},
    }


def topology_document(topology: Topology, reservations: dict) -> dict:
    nodes = [{"id": s.name, "label": s.name, "kind": "switch"} for s in topology.switches]
    nodes += [{"id": e.city, "label": e.city, "kind": "endpoint"} for e in topology.endpoints]
    edges = []
    for link in topology.links:
        reserved = reservations.get(link.key(), 0.0)
        edges.append(
            {
                "source": link.a[0],
                "target": link.b[0],
                "latency_ms": link.latency_ms,
                "capacity_mbps": link.capacity_mbps,
                "available_mbps": max(0.0, link.capacity_mbps - reserved),
                "src_port": link.a[1],
                "dst_port": link.b[1],
            }
        )
    for ep in topology.endpoints:
        edges.append(
            {
                "source": ep.switch,
                "target": ep.city,
                "latency_ms": 0.0,
                "capacity_mbps": None,
                "available_mbps": None,
                "src_port": ep.port,
                "dst_port": None,
            }
        )
    return {"nodes": nodes, "edges": edges}


class ApiGateway:
    def __init__(
        self,
        engine: IntentEngine,
        store: Store,
        dialogue: DialogueManager,
        topology: Topology,
        *,
        webhook_secret: str,
        two_factor: dict | None = None,
        ui_dir: str | None = None,
        token_ttl_s: float = TOKEN_TTL_S,
        tls: dict | None = None,
    ):
        self.engine = engine
        self.store = store
        self.dialogue = dialogue
        self.topology = topology
        self.webhook_secret = webhook_secret
        self.two_factor = two_factor or {"enabled": False, "code": ""}
        self.ui_dir = os.path.realpath(ui_dir) if ui_dir else None
        self.token_ttl_s = token_ttl_s
        self.tls = tls or {}
        self._server: ThreadingHTTPServer | None = None
        self._thread: threading.Thread | None = None
        self.port: int | None = None

    def start(self, host: str = "127.0.0.1", port: int = DEFAULT_PORT) -> int:
        gateway = self

        class Handler(_Handler):
            pass

        Handler.gateway = gateway
        self._server = ThreadingHTTPServer((host, port), Handler)
        if self.tls.get("cert") and self.tls.get("key"):
            context = ssl.SSLContext(ssl.PROTOCOL_TLS_SERVER)
            context.load_cert_chain(self.tls["cert"], self.tls["key"])
            self._server.socket = context.wrap_socket(self._server.socket, server_side=True)
        self.port = self._server.server_address[1]
        self._thread = threading.Thread(target=self._server.serve_forever, name="api-gateway", daemon=True)
        self._thread.start()
        log.info("api gateway listening on %s:%d", host, self.port)
        return self.port

    def stop(self) -> None:
        if self._server is not None:
            self._server.shutdown()
            self._server.server_close()
        if self._thread is not None:
            self._thread.join(timeout=2)


class _Handler(BaseHTTPRequestHandler):
    gateway: ApiGateway = None  # type: ignore[assignment]
    protocol_version = "HTTP/1.1"

    # --- plumbing ---

    def log_message(self, fmt, *args):
        log.debug("%s %s", self.address_string(), fmt % args)

    def _send_json(self, status: int, payload: dict | list) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _read_json(self):
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length) if length else b""
        if not raw:
            raise ValueError("empty request body")
        try:
            return json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ValueError(f"invalid JSON body: {exc}") from exc

    def _error(self, status: int, code: str, message: str, **extra) -> None:
        self._send_json(status, {"error": code, "message": message, **extra})

    def _authenticated(self) -> str | None:
        header = self.headers.get("Authorization") or ""
        if header.startswith("Bearer "):
            return self.gateway.store.session_user(header[len("Bearer "):].strip())
        return None

    def _require_auth(self) -> str | None:
        user = self._authenticated()
        if user is None:
            self._error(401, "UNAUTHORIZED", "missing or expired token")
        return user

    def _intent_error(self, exc: IntentError) -> None:
        status = ERROR_STATUS.get(exc.code, 500)
        self._error(status, exc.code, str(exc), **exc.details)

    # --- routing ---

    def do_GET(self):
        try:
            if self.path == "/api/topology":
                return self._get_topology()
            if self.path == "/api/intents":
                return self._list_intents()
            match = _INTENT_PATH.match(self.path)
            if match:
                return self._get_intent_path(match.group(1))
            return self._serve_static()
        except Exception:
            log.exception("GET %s failed", self.path)
            self._error(500, "INTERNAL", "internal error")

    def do_POST(self):
        try:
            if self.path == "/api/login":
                return self._login()
            if self.path == "/api/intents":
                return self._create_intent()
            if self.path == "/api/trace":
                return self._trace()
            if self.path == "/ask/alexa":
                return self._webhook()
            self._error(404, "NOT_FOUND", f"no route {self.path}")
        except Exception:
            log.exception("POST %s failed", self.path)
            self._error(500, "INTERNAL", "internal error")

    def do_DELETE(self):
        try:
            match = _INTENT_ID.match(self.path)
            if match:
                return self._delete_intent(match.group(1))
            self._error(404, "NOT_FOUND", f"no route {self.path}")
        except Exception:
            log.exception("DELETE %s failed", self.path)
            self._error(500, "INTERNAL", "internal error")

    # --- routes ---

    def _login(self):
        try:
            body = self._read_json()
            username = body["username"]
            password = body["password"]
        except (ValueError, KeyError, TypeError):
            return self._error(400, "BAD_REQUEST", "body must carry username and password")
        gw = self.gateway
        if not isinstance(username, str) or not isinstance(password, str):
            return self._error(400, "BAD_REQUEST", "credentials must be strings")
        if not gw.store.verify_user(username, password):
            return self._error(401, "UNAUTHORIZED", "bad credentials")
        if gw.two_factor.get("enabled"):
            supplied = str(body.get("second_factor") or "")
            if not hmac.compare_digest(supplied, str(gw.two_factor.get("code") or "")):
                return self._error(401, "UNAUTHORIZED", "second factor required")
        token, expires_at = gw.store.create_session(username, gw.token_ttl_s)
        self._send_json(200, {"token": token, "expires_at": expires_at})

    def _get_topology(self):
        if self._require_auth() is None:
            return
        gw = self.gateway
        doc = topology_document(gw.topology, gw.engine.reservations_snapshot())
        self._send_json(200, doc)

    def _list_intents(self):
        if self._require_auth() is None:
            return
        gw = self.gateway
        rows = gw.engine.list_intents()
        self._send_json(200, [record_json(r, gw.topology) for r in rows])

    def _get_intent_path(self, intent_id: str):
        if self._require_auth() is None:
            return
        gw = self.gateway
        row = gw.engine.get_intent(intent_id)
        if row is None:
            return self._error(404, "NOT_FOUND", f"no intent {intent_id}")
        payload = record_json(row, gw.topology)
        self._send_json(200, {"id": row["id"], "state": row["state"], "edges": payload["path"]["edges"]})

    def _create_intent(self):
        if self._require_auth() is None:
            return
        gw = self.gateway
        try:
            body = self._read_json()
            intent_type = body["intent_type"]
            from_city = body["from_city"]
            to_city = body["to_city"]
            demand = float(body.get("demand_mbps") or 0.0)
        except (ValueError, KeyError, TypeError) as exc:
            return self._error(400, "BAD_REQUEST", f"malformed intent body: {exc}")
        try:
            request = IntentRequest(
                intent_type=IntentType.parse(intent_type),
                from_city=str(from_city).lower().strip(),
                to_city=str(to_city).lower().strip(),
                demand_mbps=demand,
            )
            record = gw.engine.execute_intent(request)
        except IntentError as exc:
            return self._intent_error(exc)
        row = gw.engine.get_intent(record.id)
        self._send_json(201, record_json(row, gw.topology))

    def _delete_intent(self, intent_id: str):
        if self._require_auth() is None:
            return
        gw = self.gateway
        try:
            outcome = gw.engine.withdraw_intent(intent_id)
        except IntentError as exc:
            return self._intent_error(exc)
        self._send_json(
            200,
            {"id": intent_id, "state": "WITHDRAWN", "failed_switches": outcome.failed_switches},
        )

    def _trace(self):
        if self._require_auth() is None:
            return
        gw = self.gateway
        try:
            body = self._read_json()
            src_ip = str(body["src_ip"])
            dst_ip = str(body["dst_ip"])
        except (ValueError, KeyError, TypeError):
            return self._error(400, "BAD_REQUEST", "body must carry src_ip and dst_ip")
        ingress = gw.topology.endpoint_for_address(src_ip)
        if ingress is None:
            return self._error(404, "UNKNOWN_SOURCE", f"no endpoint prefix contains {src_ip}")
        tables: dict[Dpid, FlowTable] = {}
        for dpid in gw.engine.controller.ready_dpids():
            try:
                tables[dpid] = FlowTable(gw.engine.controller.flow_stats(dpid))
            except SouthboundError:
                continue
        probe = PacketProbe.make(src_ip, dst_ip, (ingress.switch, ingress.port))
        result = trace_packet(tables, gw.topology, probe)
        self._send_json(
            200,
            {
                "outcome": result.outcome,
                "hops": [
                    {
                        "switch": gw.topology.switch_by_dpid(h.dpid).name,
                        "in_port": h.in_port,
                        "out_port": h.out_port,
                    }
                    for h in result.hops
                ],
            },
        )

    def _webhook(self):
        gw = self.gateway
        supplied = self.headers.get("X-Webhook-Secret") or ""
        if not hmac.compare_digest(supplied, gw.webhook_secret):
            return self._error(401, "UNAUTHORIZED", "bad webhook secret")
        try:
            body = self._read_json()
        except ValueError as exc:
            return self._error(400, "BAD_REQUEST", str(exc))
        try:
            response = gw.dialogue.handle_webhook(body)
        except WebhookError as exc:
            return self._error(400, "BAD_REQUEST", str(exc))
        self._send_json(200, response)

    # --- static UI ---

    def _serve_static(self):
        gw = self.gateway
        if gw.ui_dir is None:
            if self.path in ("/", "/index.html"):
                body = b"<html><body><h1>intentnet</h1><p>No web UI bundled.</p></body></html>"
                self.send_response(200)
                self.send_header("Content-Type", "text/html")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)
                return
            return self._error(404, "NOT_FOUND", f"no route {self.path}")
        rel = self.path.lstrip("/") or "index.html"
        target = os.path.realpath(os.path.join(gw.ui_dir, rel))
        if not target.startswith(gw.ui_dir + os.sep) and target != gw.ui_dir:
            return self._error(404, "NOT_FOUND", "outside ui directory")
        if os.path.isdir(target):
            target = os.path.join(target, "index.html")
        if not os.path.isfile(target):
            return self._error(404, "NOT_FOUND", f"no such asset {self.path}")
        ctype = mimetypes.guess_type(target)[0] or "application/octet-stream"
        with open(target, "rb") as fh:
            body = fh.read()
        self.send_response(200)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)
