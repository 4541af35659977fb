import time

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from intentnet.store import Store, StoreConstraintError, StoreCorrupt


def record(i=1, state="ACTIVE", pair=("denver", "new york"), demand=0.0, cookie=None, created=None):
    return {
        "id": f"intent-{i}",
        "intent_type": "least latency",
        "from_city": pair[0],
        "to_city": pair[1],
        "demand_mbps": demand,
        "cookie": cookie if cookie is not None else i,
        "state": state,
        "created_at": created if created is not None else time.time() + i,
        "hops": [
            {"dpid": "00:00:00:00:00:00:00:01", "in_port": 4, "out_port": 1},
            {"dpid": "00:00:00:00:00:00:00:02", "in_port": 1, "out_port": 2},
        ],
    }


def flows_for(rec):
    return [
        {
            "dpid": h["dpid"],
            "priority": 100,
            "in_port": h["in_port"],
            "ipv4_src": "10.1.0.0/24",
            "ipv4_dst": "10.3.0.0/24",
            "out_port": h["out_port"],
            "cookie": rec["cookie"],
        }
        for h in rec["hops"]
    ]


@pytest.fixture()
def store(tmp_path):
    s = Store(str(tmp_path / "state.db"))
    yield s
    s.close()


def test_commit_and_reload(tmp_path):
    path = str(tmp_path / "state.db")
    store = Store(path)
    rec = record(1)
    store.commit_intent(rec, flows_for(rec))
    store.close()

    # Fresh handle simulating a process restart.
    reopened = Store(path)
    endpoints, actives = reopened.load_state()
    assert len(actives) == 1
    got = actives[0]
    assert got["id"] == rec["id"]
    assert got["hops"] == rec["hops"]
    assert len(got["flows"]) == 2
    reopened.close()


def test_one_active_per_pair_enforced_by_store(store):
    rec1 = record(1)
    store.commit_intent(rec1, flows_for(rec1))
    rec2 = record(2)
    with pytest.raises(StoreConstraintError):
        store.commit_intent(rec2, flows_for(rec2))
    # With supersede it goes through atomically.
    store.commit_intent(rec2, flows_for(rec2), superseded_id=rec1["id"])
    actives = store.query_intents(state="ACTIVE")
    assert [r["id"] for r in actives] == [rec2["id"]]
    assert store.get_intent(rec1["id"])["state"] == "WITHDRAWN"


def test_cookie_unique_among_active(store):
    rec1 = record(1, cookie=9)
    store.commit_intent(rec1, flows_for(rec1))
    rec2 = record(2, pair=("denver", "chicago"), cookie=9)
    with pytest.raises(StoreConstraintError):
        store.commit_intent(rec2, flows_for(rec2))


def test_interrupted_commit_leaves_old_state(store):
    rec1 = record(1)
    store.commit_intent(rec1, flows_for(rec1))

    def crash():
        raise RuntimeError("simulated crash between write phases")

    store._fault_between_phases = crash
    rec2 = record(2)
    with pytest.raises(RuntimeError):
        store.commit_intent(rec2, flows_for(rec2), superseded_id=rec1["id"])
    store._fault_between_phases = None

    actives = store.query_intents(state="ACTIVE")
    assert [r["id"] for r in actives] == [rec1["id"]]  # fully old state
    assert store.get_intent(rec2["id"]) is None


def test_corrupt_store_refused(tmp_path):
    path = tmp_path / "broken.db"
    path.write_bytes(b"not a database at all, definitely truncated")
    with pytest.raises(StoreCorrupt) as err:
        Store(str(path))
    assert "broken.db" in str(err.value)


def test_query_ordering_and_filters(store):
    base = time.time()
    for i, pair in enumerate([("denver", "new york"), ("denver", "chicago"), ("chicago", "new york")]):
        rec = record(i, pair=pair, created=base + i)
        store.commit_intent(rec, flows_for(rec))
    store.mark_withdrawn("intent-0")

    all_rows = store.query_intents()
    assert [r["id"] for r in all_rows] == ["intent-2", "intent-1", "intent-0"]
    actives = store.query_intents(state="ACTIVE")
    assert len(actives) == 2
    by_pair = store.query_intents(state="ACTIVE", pair=("denver", "chicago"))
    assert [r["id"] for r in by_pair] == ["intent-1"]
    assert store.active_intent_for_pair("denver", "new york") is None


def test_fresh_store_seeds_endpoints(store, topo5):
    endpoints, actives = store.load_state()
    assert endpoints == [] and actives == []
    store.seed_endpoints(topo5.endpoints)
    endpoints, _ = store.load_state()
    assert {e["city"] for e in endpoints} == {"denver", "new york", "chicago"}
    # Seeding again is a no-op (read-only after first boot).
    store.seed_endpoints(topo5.endpoints[:1])
    assert len(store.endpoints()) == 3


def test_users_and_sessions(store):
    store.ensure_user("admin", "hunter2")
    assert store.verify_user("admin", "hunter2")
    assert not store.verify_user("admin", "wrong")
    assert not store.verify_user("ghost", "hunter2")

    token, expires = store.create_session("admin", ttl_s=60)
    assert store.session_user(token) == "admin"
    assert store.session_user("bogus") is None

    expired, _ = store.create_session("admin", ttl_s=-1)
    assert store.session_user(expired) is None


@settings(max_examples=25, deadline=None)
@given(
    demand=st.floats(0, 1000),
    cookie=st.integers(1, 2**63 - 1),
    intent_type=st.sampled_from(["least latency", "high bandwidth", "least hopcount"]),
    n_hops=st.integers(1, 5),
)
def test_round_trip_random_records(tmp_path_factory, demand, cookie, intent_type, n_hops):
    store = Store(str(tmp_path_factory.mktemp("rt") / "s.db"))
    rec = record(1, demand=demand, cookie=cookie)
    rec["intent_type"] = intent_type
    rec["hops"] = [
        {"dpid": f"00:00:00:00:00:00:00:{i:02x}", "in_port": i, "out_port": i + 1}
        for i in range(1, n_hops + 1)
    ]
    store.commit_intent(rec, flows_for(rec))
    got = store.get_intent(rec["id"])
    for key in ("id", "intent_type", "from_city", "to_city", "demand_mbps", "cookie", "state", "hops"):
        assert got[key] == rec[key]
    store.close()
