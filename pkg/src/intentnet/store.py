"""Single-file persistent store for endpoints, intents, flows, users, sessions.

SQLite in WAL mode provides the atomic commit and crash-consistent reload
the intent transactions need. Schema constraints enforce one ACTIVE intent
per ordered city pair and cookie uniqueness independent of the engine.
"""

from __future__ import annotations

import hashlib
import hmac
import json
import secrets
import sqlite3
import threading
import time

_SCHEMA = """
CREATE TABLE IF NOT EXISTS endpoints (
    city TEXT PRIMARY KEY,
    switch TEXT NOT NULL,
    port INTEGER NOT NULL,
    prefix TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS intents (
    id TEXT PRIMARY KEY,
    intent_type TEXT NOT NULL,
    from_city TEXT NOT NULL,
    to_city TEXT NOT NULL,
    demand_mbps REAL NOT NULL DEFAULT 0,
    cookie INTEGER NOT NULL,
    state TEXT NOT NULL CHECK (state IN ('ACTIVE', 'WITHDRAWN')),
    created_at REAL NOT NULL,
    hops TEXT NOT NULL
);
CREATE UNIQUE INDEX IF NOT EXISTS one_active_per_pair
    ON intents(from_city, to_city) WHERE state = 'ACTIVE';
CREATE UNIQUE INDEX IF NOT EXISTS unique_active_cookie
    ON intents(cookie) WHERE state = 'ACTIVE';
CREATE TABLE IF NOT EXISTS flows (
    intent_id TEXT NOT NULL REFERENCES intents(id),
    dpid TEXT NOT NULL,
    priority INTEGER NOT NULL,
    in_port INTEGER,
    ipv4_src TEXT,
    ipv4_dst TEXT,
    out_port INTEGER NOT NULL,
    cookie INTEGER NOT NULL
);
CREATE INDEX IF NOT EXISTS flows_by_intent ON flows(intent_id);
CREATE TABLE IF NOT EXISTS users (
    name TEXT PRIMARY KEY,
    password_hash TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS sessions (
    token TEXT PRIMARY KEY,
    user TEXT NOT NULL REFERENCES users(name),
    expires_at REAL NOT NULL
);
"""

_SCRYPT_N, _SCRYPT_R, _SCRYPT_P = 2**14, 8, 1


class StoreError(Exception):
    pass


class StoreCorrupt(StoreError):
    """The store file exists but cannot be read; refuse to start."""


class StoreConstraintError(StoreError):
    """A write violated a schema constraint; the store is unchanged."""


def _hash_password(password: str, salt: bytes | None = None) -> str:
    salt = salt if salt is not None else secrets.token_bytes(16)
    digest = hashlib.scrypt(
        password.encode("utf-8"), salt=salt, n=_SCRYPT_N, r=_SCRYPT_R, p=_SCRYPT_P
    )
    return f"scrypt${salt.hex()}${digest.hex()}"


def _verify_password(password: str, stored: str) -> bool:
    try:
        _, salt_hex, digest_hex = stored.split("$")
        probe = hashlib.scrypt(
            password.encode("utf-8"), salt=bytes.fromhex(salt_hex),
            n=_SCRYPT_N, r=_SCRYPT_R, p=_SCRYPT_P,
        )
        return hmac.compare_digest(probe.hex(), digest_hex)
    except (ValueError, TypeError):
        return False


class Store:
    """Thread-safe wrapper over one SQLite file.

    All access is serialized by a lock; writers commit atomically and
    readers always observe the last committed snapshot.
    """

    def __init__(self, path: str):
        self.path = path
        self._lock = threading.RLock()
        # Test hook: called between the write phases of commit_intent to
        # simulate a crash mid-transaction.
        self._fault_between_phases = None
        try:
            self._conn = sqlite3.connect(path, check_same_thread=False)
            self._conn.row_factory = sqlite3.Row
            self._conn.execute("PRAGMA journal_mode=WAL")
            self._conn.execute("PRAGMA synchronous=FULL")
            self._conn.execute("PRAGMA foreign_keys=ON")
            ok = self._conn.execute("PRAGMA integrity_check").fetchone()[0]
            if ok != "ok":
                raise StoreCorrupt(f"integrity check failed for {path}: {ok}")
            self._conn.executescript(_SCHEMA)
            self._conn.commit()
        except sqlite3.DatabaseError as exc:
            raise StoreCorrupt(f"cannot open store file {path}: {exc}") from exc

    def close(self) -> None:
        with self._lock:
            self._conn.close()

    # --- endpoints ---

    def seed_endpoints(self, endpoints) -> None:
        """Populate the endpoints table at first boot; read-only afterwards."""
        with self._lock:
            count = self._conn.execute("SELECT COUNT(*) FROM endpoints").fetchone()[0]
            if count:
                return
            self._conn.executemany(
                "INSERT INTO endpoints(city, switch, port, prefix) VALUES (?, ?, ?, ?)",
                [(e.city, e.switch, e.port, str(e.prefix)) for e in endpoints],
            )
            self._conn.commit()

    def endpoints(self) -> list[dict]:
        with self._lock:
            rows = self._conn.execute("SELECT * FROM endpoints ORDER BY city").fetchall()
        return [dict(r) for r in rows]

    # --- users & sessions ---

    def ensure_user(self, name: str, password: str) -> None:
        with self._lock:
            self._conn.execute(
                "INSERT INTO users(name, password_hash) VALUES (?, ?) "
                "ON CONFLICT(name) DO UPDATE SET password_hash = excluded.password_hash",
                (name, _hash_password(password)),
            )
            self._conn.commit()

    def verify_user(self, name: str, password: str) -> bool:
        with self._lock:
            row = self._conn.execute("SELECT password_hash FROM users WHERE name = ?", (name,)).fetchone()
        if row is None:
            # Burn comparable time so user existence is not observable.
            _verify_password(password, _hash_password("decoy"))
            return False
        return _verify_password(password, row["password_hash"])

    def create_session(self, user: str, ttl_s: float) -> tuple[str, float]:
        token = secrets.token_urlsafe(16)  # 128 bits
        expires = time.time() + ttl_s
        with self._lock:
            self._conn.execute(
                "INSERT INTO sessions(token, user, expires_at) VALUES (?, ?, ?)",
                (token, user, expires),
            )
            self._conn.commit()
        return token, expires

    def session_user(self, token: str) -> str | None:
        with self._lock:
            row = self._conn.execute(
                "SELECT user, expires_at FROM sessions WHERE token = ?", (token,)
            ).fetchone()
        if row is None or row["expires_at"] < time.time():
            return None
        return row["user"]

    # --- intents ---

    def commit_intent(self, record: dict, flows: list[dict], superseded_id: str | None = None) -> str:
        """Insert a record plus flows and mark the superseded record
        WITHDRAWN in one atomic, durable transaction."""
        with self._lock:
            try:
                with self._conn:  # one transaction; rolls back on any raise
                    if superseded_id is not None:
                        cur = self._conn.execute(
                            "UPDATE intents SET state = 'WITHDRAWN' WHERE id = ? AND state = 'ACTIVE'",
                            (superseded_id,),
                        )
                        if cur.rowcount != 1:
                            raise StoreConstraintError(f"superseded intent {superseded_id} not ACTIVE")
                    if self._fault_between_phases is not None:
                        self._fault_between_phases()
                    self._conn.execute(
                        "INSERT INTO intents(id, intent_type, from_city, to_city, demand_mbps,"
                        " cookie, state, created_at, hops) VALUES (?,?,?,?,?,?,?,?,?)",
                        (
                            record["id"],
                            record["intent_type"],
                            record["from_city"],
                            record["to_city"],
                            record["demand_mbps"],
                            record["cookie"],
                            record["state"],
                            record["created_at"],
                            json.dumps(record["hops"]),
                        ),
                    )
                    self._conn.executemany(
                        "INSERT INTO flows(intent_id, dpid, priority, in_port, ipv4_src,"
                        " ipv4_dst, out_port, cookie) VALUES (?,?,?,?,?,?,?,?)",
                        [
                            (
                                record["id"],
                                f["dpid"],
                                f["priority"],
                                f["in_port"],
                                f["ipv4_src"],
                                f["ipv4_dst"],
                                f["out_port"],
                                f["cookie"],
                            )
                            for f in flows
                        ],
                    )
            except sqlite3.IntegrityError as exc:
                raise StoreConstraintError(f"intent rejected: {exc}") from exc
        return record["id"]

    def mark_withdrawn(self, intent_id: str) -> None:
        with self._lock:
            with self._conn:
                cur = self._conn.execute(
                    "UPDATE intents SET state = 'WITHDRAWN' WHERE id = ?", (intent_id,)
                )
                if cur.rowcount != 1:
                    raise StoreConstraintError(f"no intent {intent_id}")

    def _attach_flows(self, rows: list[dict]) -> list[dict]:
        for row in rows:
            with self._lock:
                flows = self._conn.execute(
                    "SELECT dpid, priority, in_port, ipv4_src, ipv4_dst, out_port, cookie"
                    " FROM flows WHERE intent_id = ? ORDER BY rowid",
                    (row["id"],),
                ).fetchall()
            row["hops"] = json.loads(row["hops"])
            row["flows"] = [dict(f) for f in flows]
        return rows

    def get_intent(self, intent_id: str) -> dict | None:
        with self._lock:
            row = self._conn.execute("SELECT * FROM intents WHERE id = ?", (intent_id,)).fetchone()
        if row is None:
            return None
        return self._attach_flows([dict(row)])[0]

    def query_intents(self, state: str | None = None, pair: tuple[str, str] | None = None) -> list[dict]:
        query = "SELECT * FROM intents"
        clauses, args = [], []
        if state is not None:
            clauses.append("state = ?")
            args.append(state)
        if pair is not None:
            clauses.append("from_city = ? AND to_city = ?")
            args.extend(pair)
        if clauses:
            query += " WHERE " + " AND ".join(clauses)
        query += " ORDER BY created_at DESC, id"
        with self._lock:
            rows = [dict(r) for r in self._conn.execute(query, args).fetchall()]
        return self._attach_flows(rows)

    def active_intent_for_pair(self, from_city: str, to_city: str) -> dict | None:
        rows = self.query_intents(state="ACTIVE", pair=(from_city, to_city))
        return rows[0] if rows else None

    def active_cookies(self) -> set[int]:
        with self._lock:
            rows = self._conn.execute("SELECT cookie FROM intents WHERE state = 'ACTIVE'").fetchall()
        return {r["cookie"] for r in rows}

    def load_state(self) -> tuple[list[dict], list[dict]]:
        """Committed endpoints and ACTIVE intents (with flows), for startup."""
        return self.endpoints(), self.query_intents(state="ACTIVE")
