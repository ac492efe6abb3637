"""Remote chat-completion agents with record/replay transports.

Requests are canonical JSON bodies (sorted keys), so with temperature 0 and
fixed templates identical inputs produce byte-identical requests. That makes
request-keyed replay fixtures possible: every remote interaction can be
captured once and replayed offline, keeping the full evaluation pipeline
runnable in CI without network access.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import httpx

from ..core import EggGraph, Layer, TimeInterval
from ..errors import (
    ExtractionFailedError,
    GenerationFailedError,
    JudgeFailedError,
    ModalityViolationError,
    ReplayMissError,
    TransportError,
)
from ..pruning import PruneConfig, RelevantInfo, Subgraph, prune_location, prune_time
from ..serialization import iso_utc, parse
from .base import (
    AgentConfig,
    Answer,
    AnswerPayload,
    Modality,
    QueryRecord,
    load_template,
    payload_from_json,
    payload_repr,
    render_answer_prompt,
    render_template,
    resolve_event_refs,
    resolve_spatial_names,
)

logger = logging.getLogger(__name__)

ENDPOINT_ENV = "EGG_ENDPOINT"
API_KEY_ENV = "EGG_API_KEY"


def canonical_request_body(body: dict) -> str:
    return json.dumps(body, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def request_key(body: dict) -> str:
    return hashlib.sha256(canonical_request_body(body).encode("utf-8")).hexdigest()[:24]


class Transport(Protocol):
    def send(self, body: dict) -> dict:
        """Deliver one chat-completion request body, returning the response."""


class HttpTransport:
    """POSTs request bodies to a chat-completion endpoint."""

    def __init__(self, endpoint: str | None = None, api_key: str | None = None, timeout: float = 30.0):
        self.endpoint = endpoint or os.environ.get(ENDPOINT_ENV, "")
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV, "")
        self.timeout = timeout
        if not self.endpoint:
            raise TransportError(f"no endpoint configured (set {ENDPOINT_ENV})")

    def send(self, body: dict) -> dict:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            response = httpx.post(
                self.endpoint,
                content=canonical_request_body(body),
                headers=headers,
                timeout=self.timeout,
            )
            response.raise_for_status()
            return response.json()
        except httpx.HTTPError as exc:
            raise TransportError(f"chat request failed: {exc}") from exc


class ReplayTransport:
    """Serves responses recorded on disk, keyed by request body hash."""

    def __init__(self, fixture_dir: str | Path):
        self.fixture_dir = Path(fixture_dir)

    def send(self, body: dict) -> dict:
        path = self.fixture_dir / f"{request_key(body)}.json"
        if not path.exists():
            raise ReplayMissError(f"no replay fixture for request {request_key(body)}")
        data = json.loads(path.read_text(encoding="utf-8"))
        return data["response"]


class RecordingTransport:
    """Wraps another transport and captures request/response pairs to disk."""

    def __init__(self, inner: Transport, fixture_dir: str | Path):
        self.inner = inner
        self.fixture_dir = Path(fixture_dir)
        self.fixture_dir.mkdir(parents=True, exist_ok=True)

    def send(self, body: dict) -> dict:
        response = self.inner.send(body)
        path = self.fixture_dir / f"{request_key(body)}.json"
        path.write_text(
            json.dumps({"request": body, "response": response}, indent=2, sort_keys=True)
            + "\n",
            encoding="utf-8",
        )
        return response


def build_transport(
    config: AgentConfig,
    replay_dir: str | Path | None = None,
    record_dir: str | Path | None = None,
) -> Transport:
    """Wire up the transport stack: replay when given, else HTTP, optionally
    recording everything that goes through."""
    if replay_dir is not None:
        return ReplayTransport(replay_dir)
    transport: Transport = HttpTransport(
        endpoint=config.endpoint or None, timeout=config.timeout
    )
    if record_dir is not None:
        transport = RecordingTransport(transport, record_dir)
    return transport


_REPAIR_INSTRUCTION = (
    "Your previous reply was not valid JSON of the required shape. "
    "Reply again with ONLY the required JSON object."
)


class ChatClient:
    """One chat-completion call pattern: send, parse JSON, reprompt once."""

    def __init__(self, config: AgentConfig, transport: Transport):
        self.config = config
        self.transport = transport

    def _body(self, messages: list[dict]) -> dict:
        return {
            "model": self.config.model,
            "temperature": self.config.temperature,
            "messages": messages,
            "response_format": {"type": "json_object"},
        }

    def _send(self, body: dict) -> str:
        last: Exception | None = None
        for attempt in range(max(1, self.config.max_retries)):
            try:
                response = self.transport.send(body)
                return response["choices"][0]["message"]["content"]
            except ReplayMissError:
                raise
            except (TransportError, KeyError, IndexError, TypeError) as exc:
                last = exc
                if attempt + 1 < max(1, self.config.max_retries):
                    time.sleep(min(4.0, 0.5 * 2**attempt))
        raise TransportError(f"chat request failed after retries: {last}") from last

    def complete_json(self, prompt: str) -> dict:
        """Send a prompt, parse a JSON object back, reprompting once."""
        messages = [{"role": "user", "content": prompt}]
        content = self._send(self._body(messages))
        parsed = _try_json_object(content)
        if parsed is not None:
            return parsed
        retry_messages = messages + [
            {"role": "assistant", "content": content},
            {"role": "user", "content": _REPAIR_INSTRUCTION},
        ]
        content = self._send(self._body(retry_messages))
        parsed = _try_json_object(content)
        if parsed is None:
            raise ValueError(f"agent output is not a JSON object: {content[:200]!r}")
        return parsed


def _try_json_object(text: str) -> dict | None:
    text = (text or "").strip()
    try:
        data = json.loads(text)
        return data if isinstance(data, dict) else None
    except json.JSONDecodeError:
        pass
    start, end = text.find("{"), text.rfind("}")
    if start != -1 and end > start:
        try:
            data = json.loads(text[start : end + 1])
            return data if isinstance(data, dict) else None
        except json.JSONDecodeError:
            return None
    return None


def _format_horizon(window: TimeInterval) -> str:
    return (
        f"{iso_utc(window.start)} .. {iso_utc(window.end)} "
        f"(micros {window.start} .. {window.end})"
    )


@dataclass
class RemoteRelevanceExtractor:
    """Two-stage prompting: time window and rooms first, then objects and
    events from the stage-one narrowed view."""

    config: AgentConfig
    transport: Transport
    prune_config: PruneConfig = field(default_factory=PruneConfig)

    def __post_init__(self):
        self._client = ChatClient(self.config, self.transport)

    def extract_relevant_info(self, query: QueryRecord, full: EggGraph) -> RelevantInfo:
        horizon = full.horizon()
        room_lines = "\n".join(f"{node.id}: {node.name}" for node in full.rooms())
        prompt = render_template(
            load_template("extract_stage1.txt", self.config.prompt_dir),
            {
                "QUESTION": query.question,
                "ROOMS": room_lines or "(none)",
                "HORIZON": _format_horizon(horizon),
            },
        )
        try:
            stage1 = self._client.complete_json(prompt)
        except ValueError as exc:
            raise ExtractionFailedError(str(exc)) from exc

        window = horizon
        raw_time = stage1.get("time")
        if isinstance(raw_time, dict) and {"start", "end"} <= set(raw_time):
            try:
                lo, hi = int(raw_time["start"]), int(raw_time["end"])
                window = TimeInterval(min(lo, hi), max(lo, hi))
            except (TypeError, ValueError) as exc:
                logger.warning("ignoring unusable time window %r (%s)", raw_time, exc)
        raw_rooms = stage1.get("rooms") or []
        rooms = resolve_spatial_names(
            full, (str(r) for r in raw_rooms), layer=Layer.ROOM
        )
        if not rooms:
            rooms = full.room_ids()

        narrowed = prune_location(
            prune_time(Subgraph.full(full), window, self.prune_config),
            rooms,
            self.prune_config,
        )
        view = narrowed.materialize()
        object_lines = "\n".join(
            f"{node.id}: {node.name} — {node.caption}" for node in view.objects()
        )
        event_lines = "\n".join(
            f"{event.id} [{iso_utc(event.interval.start)} .. {iso_utc(event.interval.end)}]: {event.summary}"
            for event in view.events()
        )
        prompt = render_template(
            load_template("extract_stage2.txt", self.config.prompt_dir),
            {
                "QUESTION": query.question,
                "OBJECTS": object_lines or "(none)",
                "EVENTS": event_lines or "(none)",
            },
        )
        try:
            stage2 = self._client.complete_json(prompt)
        except ValueError as exc:
            raise ExtractionFailedError(str(exc)) from exc

        objects = resolve_spatial_names(
            view, (str(o) for o in stage2.get("objects") or []), layer=Layer.OBJECT
        )
        events = resolve_event_refs(view, (str(e) for e in stage2.get("events") or []))
        return RelevantInfo(
            time=window, locations=rooms, spatial=objects, events=events
        )


@dataclass
class RemoteAnswerGenerator:
    """Answer generation over the serialized context, with the output
    constrained to the modality's JSON shape (one reprompt on violation)."""

    config: AgentConfig
    transport: Transport

    def __post_init__(self):
        self._client = ChatClient(self.config, self.transport)

    def generate_answer(self, query: QueryRecord, context: str) -> Answer:
        prompt = render_answer_prompt(
            query.question, context, query.modality, self.config.prompt_dir
        )
        try:
            data = self._client.complete_json(prompt)
            try:
                payload = self._payload(query.modality, data, context)
            except ModalityViolationError:
                data = self._client.complete_json(prompt + "\n\n" + _REPAIR_INSTRUCTION)
                payload = self._payload(query.modality, data, context)
        except (ValueError, TransportError) as exc:
            raise GenerationFailedError(str(exc)) from exc
        rationale = data.get("rationale") if isinstance(data.get("rationale"), str) else None
        return Answer(query.modality, payload, rationale=rationale)

    def _payload(self, modality: Modality, data: dict, context: str) -> AnswerPayload:
        if "answer" not in data:
            raise ModalityViolationError("missing 'answer' field")
        raw = data["answer"]
        if modality is Modality.NODE:
            if not isinstance(raw, list):
                raise ModalityViolationError(f"node answer must be a list, got {raw!r}")
            return resolve_spatial_names(parse(context), (str(i) for i in raw))
        return payload_from_json(modality, raw)


@dataclass
class RemoteJudge:
    """Semantic 0..1 scoring of a predicted answer against gold."""

    config: AgentConfig
    transport: Transport

    def __post_init__(self):
        self._client = ChatClient(self.config, self.transport)

    def judge_answer(
        self, query: QueryRecord, gold: AnswerPayload, predicted: Answer
    ) -> float:
        prompt = render_template(
            load_template("judge.txt", self.config.prompt_dir),
            {
                "QUESTION": query.question,
                "GOLD": payload_repr(gold),
                "PREDICTED": payload_repr(predicted.payload),
            },
        )
        try:
            data = self._client.complete_json(prompt)
            score = float(data["score"])
        except (ValueError, KeyError, TypeError, TransportError) as exc:
            raise JudgeFailedError(f"judge produced no usable score: {exc}") from exc
        return min(1.0, max(0.0, score))
