"""Transcript-driven slot filling for the voice-style frontend.

Utterances (already transcribed to text) are matched against sample
templates; a per-session funnel collects the intent type and the two
cities, reads the request back for confirmation, and only then invokes
the intent pipeline. Speech recognition itself stays outside: this module
consumes transcripts through a webhook-shaped request/response codec.
"""

from __future__ import annotations

import logging
import re
import threading
import time
import uuid
from dataclasses import dataclass, field

from .engine import IntentError, IntentRequest, IntentType
from .topo import Topology, normalize_city

log = logging.getLogger(__name__)

AWAITING_COMMAND = "AWAITING_COMMAND"
AWAITING_SLOTS = "AWAITING_SLOTS"
AWAITING_CONFIRMATION = "AWAITING_CONFIRMATION"
CLOSED = "CLOSED"

SLOT_ORDER = ("intent_type", "from_city", "to_city")

DEFAULT_TIMEOUT_S = 8.0

_PUNCT = re.compile(r"[^a-z0-9\s]")


class WebhookError(Exception):
    """Malformed webhook request; maps to a 400-class response."""


def normalize(transcript: str) -> list[str]:
    """Lowercase, strip punctuation, split on whitespace."""
    return _PUNCT.sub(" ", transcript.lower()).split()


@dataclass(frozen=True)
class Template:
    intent: str  # "LaunchRequest" | "CreateIntent"
    items: tuple[str, ...]  # literal tokens and "{slot}" placeholders
    stages: frozenset[str]


@dataclass(frozen=True)
class MatchResult:
    intent: str
    slots: dict


TIMEOUT = "TIMEOUT"  # advance() event for an expired session


class InteractionModel:
    """Invocation word, slot synonym tables, and the sample templates."""

    def __init__(self, invocation: str = "vivonet"):
        self.invocation = invocation
        self.intent_type_synonyms: dict[str, str] = {}
        for canonical, phrases in {
            "least latency": ("least latency", "lowest latency", "fastest"),
            "high bandwidth": ("high bandwidth", "highest bandwidth", "widest"),
            "least hopcount": ("least hopcount", "least hop count", "fewest hops", "shortest"),
        }.items():
            for phrase in phrases:
                self.intent_type_synonyms[phrase] = canonical
        self.confirmation_synonyms = {
            "yes": "yes", "yeah": "yes", "confirm": "yes",
            "no": "no", "cancel": "no", "stop": "no",
        }
        inv = invocation
        command_stages = frozenset({AWAITING_COMMAND, AWAITING_SLOTS})
        slot_stages = frozenset({AWAITING_SLOTS})
        self.templates: tuple[Template, ...] = (
            Template("LaunchRequest", ("launch", inv), frozenset({AWAITING_COMMAND})),
            Template("CreateIntent",
                     (inv, "setup", "a", "{intent_type}", "path", "from", "{from_city}", "to", "{to_city}"),
                     command_stages),
            Template("CreateIntent",
                     ("setup", "a", "{intent_type}", "path", "from", "{from_city}", "to", "{to_city}"),
                     command_stages),
            Template("CreateIntent",
                     (inv, "setup", "a", "path", "from", "{from_city}", "to", "{to_city}"),
                     command_stages),
            Template("CreateIntent",
                     ("setup", "a", "path", "from", "{from_city}", "to", "{to_city}"),
                     command_stages),
            Template("CreateIntent", ("{intent_type}",), slot_stages),
            Template("CreateIntent", ("{from_city}", "to", "{to_city}"), slot_stages),
            Template("CreateIntent", ("{confirmation}",), frozenset({AWAITING_CONFIRMATION})),
        )
        for template in self.templates:
            if not template.items:
                raise ValueError("templates must be non-empty")


def _min_tokens(items: tuple[str, ...]) -> int:
    return len(items)  # every literal and slot consumes at least one token


def _match_items(items: tuple[str, ...], tokens: list[str], model: InteractionModel) -> dict | None:
    """Backtracking matcher; slots capture greedily from the left."""
    if not items:
        return {} if not tokens else None
    head, rest = items[0], items[1:]
    if not tokens:
        return None
    if head == "{intent_type}":
        # Longest synonym first keeps the capture greedy.
        for phrase, canonical in sorted(
            model.intent_type_synonyms.items(), key=lambda kv: -len(kv[0].split())
        ):
            words = phrase.split()
            if tokens[: len(words)] == words:
                tail = _match_items(rest, tokens[len(words):], model)
                if tail is not None:
                    return {"intent_type": canonical, **tail}
        return None
    if head == "{confirmation}":
        value = model.confirmation_synonyms.get(tokens[0])
        if value is None:
            return None
        tail = _match_items(rest, tokens[1:], model)
        if tail is not None:
            return {"confirmation": value, **tail}
        return None
    if head in ("{from_city}", "{to_city}"):
        slot = head[1:-1]
        longest = len(tokens) - _min_tokens(rest)
        for take in range(longest, 0, -1):
            tail = _match_items(rest, tokens[take:], model)
            if tail is not None:
                return {slot: " ".join(tokens[:take]), **tail}
        return None
    # Literal anchor word.
    if tokens[0] != head:
        return None
    return _match_items(rest, tokens[1:], model)


def match_utterance(
    tokens: list[str],
    stage: str,
    model: InteractionModel,
    filled: dict | None = None,
) -> MatchResult | None:
    """First matching template in declaration order, or None (NO_MATCH).

    At AWAITING_SLOTS a bare utterance additionally fills the first missing
    city slot, so funnel answers like "chicago" land in the right place.
    """
    filled = filled or {}
    templates = [t for t in model.templates if stage in t.stages]
    if stage == AWAITING_SLOTS:
        for slot in ("from_city", "to_city"):
            if slot not in filled:
                templates.append(Template("CreateIntent", (f"{{{slot}}}",), frozenset({AWAITING_SLOTS})))
                break
    for template in templates:
        slots = _match_items(template.items, tokens, model)
        if slots is not None:
            return MatchResult(intent=template.intent, slots=slots)
    return None


# --- session machine ---


@dataclass
class DialogueSession:
    session_id: str
    stage: str = AWAITING_COMMAND
    filled: dict = field(default_factory=dict)
    last_activity: float = field(default_factory=time.time)
    exchanges: int = 0
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)


@dataclass(frozen=True)
class TurnResponse:
    speech_text: str
    should_end_session: bool
    session_attributes: dict


GREETING = "Welcome to the network assistant. Ask me to set up a path between two cities."
PROMPTS = {
    "intent_type": "What kind of path do you need: least latency, high bandwidth, or least hopcount?",
    "from_city": "Which city should the path start from?",
    "to_city": "Which city should the path go to?",
}
REPROMPTS = {
    AWAITING_COMMAND: "Sorry, I didn't catch that. Try: setup a least latency path from denver to new york.",
    AWAITING_SLOTS: "Sorry, I didn't catch that.",
    AWAITING_CONFIRMATION: "Please answer yes or no.",
}
CANCELLED = "Okay, cancelled. Nothing was changed."
TIMED_OUT = "The session timed out."
SESSION_CLOSED_SPEECH = "This session has ended. Say launch to start again."


class DialogueManager:
    """Sessions keyed by id; turns within one session are serialized."""

    def __init__(
        self,
        model: InteractionModel,
        topology: Topology,
        execute,  # callable(IntentRequest) -> IntentRecord, raises IntentError
        *,
        timeout_s: float = DEFAULT_TIMEOUT_S,
        clock=time.time,
    ):
        self.model = model
        self.topology = topology
        self.execute = execute
        self.timeout_s = timeout_s
        self.clock = clock
        self._sessions: dict[str, DialogueSession] = {}
        self._lock = threading.Lock()

    def _session(self, session_id: str | None) -> DialogueSession:
        with self._lock:
            if session_id is not None and session_id in self._sessions:
                return self._sessions[session_id]
            session = DialogueSession(session_id=session_id or uuid.uuid4().hex)
            session.last_activity = self.clock()
            self._sessions[session.session_id] = session
            return session

    def expire_sessions(self, now: float | None = None) -> list[str]:
        """Close sessions idle past the per-turn timeout; purge them so a
        later request with the same id starts fresh."""
        now = self.clock() if now is None else now
        closed = []
        with self._lock:
            for sid, session in list(self._sessions.items()):
                if now - session.last_activity > self.timeout_s:
                    if session.stage != CLOSED:
                        self._advance(session, TIMEOUT)
                        closed.append(sid)
                    del self._sessions[sid]
        return closed

    # --- webhook codec ---

    def handle_webhook(self, payload) -> dict:
        if not isinstance(payload, dict):
            raise WebhookError("request body must be a JSON object")
        kind = payload.get("type")
        if kind not in ("Launch", "Intent", "Utterance"):
            raise WebhookError(f"unknown request type: {kind!r}")
        session_id = payload.get("session_id")
        if session_id is not None and not isinstance(session_id, str):
            raise WebhookError("session_id must be a string")
        slots = payload.get("slots") or {}
        if not isinstance(slots, dict):
            raise WebhookError("slots must be an object")
        transcript = payload.get("transcript") or ""
        if not isinstance(transcript, str):
            raise WebhookError("transcript must be a string")

        session = self._session(session_id)
        with session.lock:
            if session.stage == CLOSED:
                response = TurnResponse(
                    speech_text=SESSION_CLOSED_SPEECH,
                    should_end_session=True,
                    session_attributes={"session_id": session.session_id, "error": "SESSION_CLOSED"},
                )
                return self._encode(response)
            session.last_activity = self.clock()
            session.exchanges += 1

            if kind == "Launch":
                response = self._advance(session, MatchResult("LaunchRequest", {}))
            elif kind == "Intent":
                merged = dict(self._clean_slots(slots))
                if transcript:
                    match = match_utterance(normalize(transcript), session.stage, self.model, session.filled)
                    if match is not None:
                        merged.update(match.slots)
                response = self._advance(session, MatchResult("CreateIntent", merged))
            else:
                match = match_utterance(normalize(transcript), session.stage, self.model, session.filled)
                response = self._advance(session, match)
            return self._encode(response)

    def _clean_slots(self, slots: dict) -> dict:
        cleaned = {}
        for name, value in slots.items():
            if name not in ("intent_type", "from_city", "to_city", "confirmation") or value is None:
                continue
            text = " ".join(str(value).lower().split())
            if name == "intent_type":
                cleaned[name] = self.model.intent_type_synonyms.get(text, text)
            elif name == "confirmation":
                cleaned[name] = self.model.confirmation_synonyms.get(text, text)
            else:
                cleaned[name] = normalize_city(text)
        return cleaned

    def _encode(self, response: TurnResponse) -> dict:
        return {
            "speech_text": response.speech_text,
            "should_end_session": response.should_end_session,
            "session_attributes": response.session_attributes,
        }

    # --- funnel ---

    def _attrs(self, session: DialogueSession) -> dict:
        return {
            "session_id": session.session_id,
            "stage": session.stage,
            "filled": dict(session.filled),
            "exchanges": session.exchanges,
        }

    def _advance(self, session: DialogueSession, match: MatchResult | str | None) -> TurnResponse:
        if match == TIMEOUT:
            session.stage = CLOSED
            return TurnResponse(TIMED_OUT, True, self._attrs(session))
        if match is None:
            return TurnResponse(REPROMPTS[session.stage], False, self._attrs(session))

        if match.intent == "LaunchRequest":
            session.stage = AWAITING_COMMAND
            return TurnResponse(GREETING, False, self._attrs(session))

        if "confirmation" in match.slots and session.stage == AWAITING_CONFIRMATION:
            return self._confirm(session, match.slots["confirmation"])

        for name in SLOT_ORDER:
            if name in match.slots:
                value = match.slots[name]
                session.filled[name] = normalize_city(value) if name.endswith("_city") else value

        missing = [name for name in SLOT_ORDER if name not in session.filled]
        if missing:
            session.stage = AWAITING_SLOTS
            return TurnResponse(PROMPTS[missing[0]], False, self._attrs(session))

        session.stage = AWAITING_CONFIRMATION
        speech = (
            f"You asked for a {session.filled['intent_type']} path from "
            f"{session.filled['from_city']} to {session.filled['to_city']}. Shall I proceed?"
        )
        return TurnResponse(speech, False, self._attrs(session))

    def _confirm(self, session: DialogueSession, answer: str) -> TurnResponse:
        session.stage = CLOSED
        if answer != "yes":
            return TurnResponse(CANCELLED, True, self._attrs(session))
        try:
            request = IntentRequest(
                intent_type=IntentType.parse(session.filled["intent_type"]),
                from_city=session.filled["from_city"],
                to_city=session.filled["to_city"],
            )
            record = self.execute(request)
        except IntentError as exc:
            speech = f"Sorry, that failed: {exc}."
            if exc.code == "UNKNOWN_CITY":
                known = ", ".join(exc.details.get("known_cities", []))
                speech = f"Sorry, I don't know {exc.details.get('city')}. I know: {known}."
            return TurnResponse(speech, True, self._attrs(session))
        names = ", ".join(self.topology.switch_by_dpid(h.dpid).name for h in record.path.hops)
        speech = (
            f"Done. Your {record.request.intent_type.value} path from "
            f"{record.request.from_city} to {record.request.to_city} is active via {names}."
        )
        return TurnResponse(speech, True, self._attrs(session))
