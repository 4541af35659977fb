import itertools
import random
import time
import uuid

import pytest

from intentnet.dialogue import (
    AWAITING_COMMAND,
    AWAITING_CONFIRMATION,
    AWAITING_SLOTS,
    DialogueManager,
    InteractionModel,
    WebhookError,
    match_utterance,
    normalize,
)
from intentnet.engine import (
    IntentError,
    IntentRecord,
    IntentRequest,
    enumerate_paths,
    synthesize_flows,
)


@pytest.fixture()
def model():
    return InteractionModel()


class FakeEngine:
    """Stands in for the intent pipeline; records invocations."""

    def __init__(self, topo):
        self.topo = topo
        self.calls = []
        self.fail_with = None

    def __call__(self, request: IntentRequest) -> IntentRecord:
        self.calls.append(request)
        if self.fail_with is not None:
            raise self.fail_with
        for city in (request.from_city, request.to_city):
            if self.topo.endpoint_by_city(city) is None:
                raise IntentError("UNKNOWN_CITY", "unknown", city=city,
                                  known_cities=self.topo.cities())
        ingress = self.topo.endpoint_by_city(request.from_city)
        egress = self.topo.endpoint_by_city(request.to_city)
        path = enumerate_paths(self.topo, ingress, egress)[0]
        return IntentRecord(
            id=uuid.uuid4().hex,
            request=request,
            path=path,
            flows=synthesize_flows(path, cookie=1),
            cookie=1,
            state="ACTIVE",
            created_at=time.time(),
        )


@pytest.fixture()
def manager(topo5, model):
    engine = FakeEngine(topo5)
    mgr = DialogueManager(model, topo5, engine)
    return mgr, engine


def post(mgr, transcript=None, kind=None, session_id="s-1", slots=None):
    payload = {"session_id": session_id}
    if kind is not None:
        payload["type"] = kind
    else:
        payload["type"] = "Utterance"
        payload["transcript"] = transcript
    if transcript is not None and kind is not None:
        payload["transcript"] = transcript
    if slots is not None:
        payload["slots"] = slots
    return mgr.handle_webhook(payload)


# --- normalize ---


def test_normalize_examples():
    assert normalize("Launch VIVoNet!") == ["launch", "vivonet"]
    assert normalize("Setup a LEAST latency path") == ["setup", "a", "least", "latency", "path"]
    assert normalize("") == []


# --- match_utterance ---


def test_match_full_command(model):
    tokens = normalize("vivonet setup a least latency path from denver to new york")
    match = match_utterance(tokens, AWAITING_COMMAND, model)
    assert match is not None and match.intent == "CreateIntent"
    assert match.slots == {
        "intent_type": "least latency",
        "from_city": "denver",
        "to_city": "new york",
    }


def test_match_cities_only_in_slot_stage(model):
    match = match_utterance(["san", "francisco", "to", "chicago"], AWAITING_SLOTS, model)
    assert match is not None
    assert match.slots == {"from_city": "san francisco", "to_city": "chicago"}


def test_match_rejects_garbage(model):
    assert match_utterance(["please", "reboot", "everything"], AWAITING_COMMAND, model) is None


def test_match_synonyms(model):
    match = match_utterance(normalize("setup a fastest path from denver to chicago"),
                            AWAITING_COMMAND, model)
    assert match.slots["intent_type"] == "least latency"
    match = match_utterance(["fewest", "hops"], AWAITING_SLOTS, model)
    assert match.slots == {"intent_type": "least hopcount"}


def test_match_bare_city_fills_pending_slot(model):
    match = match_utterance(["new", "york"], AWAITING_SLOTS, model,
                            filled={"intent_type": "least latency", "from_city": "denver"})
    assert match.slots == {"to_city": "new york"}


def test_match_is_deterministic(model):
    pools = [
        normalize("vivonet setup a high bandwidth path from denver to new york"),
        ["denver", "to", "new", "york"],
        ["yes"],
        ["maybe", "tomorrow"],
    ]
    for tokens in pools:
        for stage in (AWAITING_COMMAND, AWAITING_SLOTS, AWAITING_CONFIRMATION):
            first = match_utterance(tokens, stage, model)
            second = match_utterance(tokens, stage, model)
            assert first == second


# --- the funnel ---


def test_full_script_with_all_slots_is_three_exchanges(manager):
    mgr, engine = manager
    r1 = post(mgr, "launch vivonet")
    assert "welcome" in r1["speech_text"].lower()
    assert r1["should_end_session"] is False

    r2 = post(mgr, "setup a least latency path from denver to new york")
    assert r2["session_attributes"]["stage"] == AWAITING_CONFIRMATION
    assert "least latency path from denver to new york" in r2["speech_text"]

    r3 = post(mgr, "yes")
    assert "active via s1, s2, s3" in r3["speech_text"]
    assert r3["should_end_session"] is True
    assert len(engine.calls) == 1
    assert r3["session_attributes"]["exchanges"] == 3  # never exceeds 4


def test_funnel_script_is_exactly_four_exchanges(manager):
    mgr, engine = manager
    post(mgr, "launch vivonet")
    r2 = post(mgr, "vivonet setup a path from denver to new york")
    assert "least latency, high bandwidth, or least hopcount" in r2["speech_text"]
    assert r2["session_attributes"]["stage"] == AWAITING_SLOTS

    r3 = post(mgr, "least latency")
    assert r3["session_attributes"]["stage"] == AWAITING_CONFIRMATION

    r4 = post(mgr, "yes")
    assert r4["should_end_session"] is True
    assert r4["session_attributes"]["exchanges"] == 4
    assert len(engine.calls) == 1


def test_missing_intent_type_prompt_then_fill(manager):
    mgr, engine = manager
    post(mgr, "setup a path from denver to new york")
    r = post(mgr, "high bandwidth")
    assert r["session_attributes"]["filled"]["intent_type"] == "high bandwidth"
    assert r["session_attributes"]["stage"] == AWAITING_CONFIRMATION


def test_confirmation_no_cancels_without_side_effect(manager):
    mgr, engine = manager
    post(mgr, "launch vivonet")
    post(mgr, "setup a least latency path from denver to new york")
    r = post(mgr, "no")
    assert "cancelled" in r["speech_text"].lower()
    assert r["should_end_session"] is True
    assert engine.calls == []


def test_no_side_effect_without_explicit_yes(manager):
    mgr, engine = manager
    vocabulary = [
        "launch vivonet",
        "setup a least latency path from denver to new york",
        "setup a path from chicago to denver",
        "high bandwidth",
        "denver to chicago",
        "please reboot everything",
        "maybe",
        "new york",
    ]
    rng = random.Random(99)
    for round_no in range(25):
        sid = f"fuzz-{round_no}"
        for _ in range(rng.randint(1, 6)):
            post(mgr, rng.choice(vocabulary), session_id=sid)
    assert engine.calls == []


def test_slot_order_independence(manager):
    mgr, engine = manager
    fillers = {
        "intent_type": "least latency",
        "cities": "denver to new york",
    }
    final_maps = []
    for order in itertools.permutations(fillers.values()):
        sid = f"order-{hash(order)}"
        post(mgr, "setup a path from denver to new york", session_id=sid)
        # Overwrite/fill slots in each order.
        for utterance in order:
            r = post(mgr, utterance, session_id=sid)
        final_maps.append((r["session_attributes"]["stage"], tuple(sorted(r["session_attributes"]["filled"].items()))))
    assert len(set(final_maps)) == 1
    assert final_maps[0][0] == AWAITING_CONFIRMATION


def test_failure_speech_reports_known_cities(manager):
    mgr, engine = manager
    post(mgr, "setup a least latency path from denver to boston")
    r = post(mgr, "yes")
    assert "boston" in r["speech_text"]
    assert "chicago" in r["speech_text"]
    assert r["should_end_session"] is True


def test_turn_on_closed_session_is_error(manager):
    mgr, engine = manager
    post(mgr, "launch vivonet")
    post(mgr, "setup a least latency path from denver to new york")
    post(mgr, "no")
    r = post(mgr, "yes")
    assert r["session_attributes"].get("error") == "SESSION_CLOSED"


# --- webhook behaviors ---


def test_intent_request_with_all_slots_skips_funnel(manager):
    mgr, engine = manager
    r = post(mgr, kind="Intent", slots={
        "intent_type": "Least Latency", "from_city": "Denver", "to_city": "New York"})
    assert r["session_attributes"]["stage"] == AWAITING_CONFIRMATION
    assert "shall i proceed" in r["speech_text"].lower()


def test_launch_request_type(manager):
    mgr, engine = manager
    r = post(mgr, kind="Launch")
    assert "welcome" in r["speech_text"].lower()
    assert r["should_end_session"] is False


def test_malformed_webhook_rejected(manager):
    mgr, engine = manager
    with pytest.raises(WebhookError):
        mgr.handle_webhook({"type": "Teleport"})
    with pytest.raises(WebhookError):
        mgr.handle_webhook(["not", "an", "object"])
    with pytest.raises(WebhookError):
        mgr.handle_webhook({"type": "Utterance", "slots": "nope"})


# --- expiry ---


def test_expiry(topo5, model):
    now = [1000.0]
    engine = FakeEngine(topo5)
    mgr = DialogueManager(model, topo5, engine, timeout_s=8.0, clock=lambda: now[0])

    post(mgr, "launch vivonet", session_id="a")
    post(mgr, "launch vivonet", session_id="b")
    now[0] += 7.0
    post(mgr, "setup a path from denver to new york", session_id="b")

    now[0] += 2.0  # "a" idle 9s, "b" idle 2s
    closed = mgr.expire_sessions()
    assert closed == ["a"]
    assert mgr.expire_sessions() == []

    # Unknown/expired session id starts fresh rather than erroring.
    r = post(mgr, "launch vivonet", session_id="a")
    assert "welcome" in r["speech_text"].lower()
    assert r["session_attributes"]["stage"] == AWAITING_COMMAND


def test_timeout_event_closes_with_timeout_speech(topo5, model):
    from intentnet.dialogue import CLOSED, TIMED_OUT, TIMEOUT, DialogueSession

    engine = FakeEngine(topo5)
    mgr = DialogueManager(model, topo5, engine)
    session = DialogueSession(session_id="t")
    response = mgr._advance(session, TIMEOUT)
    assert response.speech_text == TIMED_OUT
    assert response.should_end_session is True
    assert session.stage == CLOSED
