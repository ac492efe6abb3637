"""Shared agent types: queries, answers, configuration, name resolution.

Agents communicate in scene vocabulary (names, captions, summaries); this
module owns the mapping back to node ids. Names that cannot be mapped are
dropped with a logged warning so dangling ids never reach pruning or
answer payloads.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Iterable, Protocol

from ..core import EggGraph, Layer, TimeInterval, id_sort_key
from ..errors import GraphFormatError, ModalityViolationError
from ..serialization import dataset_payload_from_text, iso_utc

logger = logging.getLogger(__name__)


class Modality(str, Enum):
    """Answer type of a query."""

    TEXT = "text"
    BINARY = "binary"
    NODE = "node"
    TIME = "time"


#: Payload domain per modality: free text, a truth value, a set of node ids,
#: or a time value (interval or instant). ``None`` marks abstention.
AnswerPayload = str | bool | frozenset | TimeInterval | int | None


def payload_fits(modality: Modality, payload: AnswerPayload) -> bool:
    if payload is None:
        return True
    if modality is Modality.TEXT:
        return isinstance(payload, str)
    if modality is Modality.BINARY:
        return isinstance(payload, bool)
    if modality is Modality.NODE:
        return isinstance(payload, frozenset) and all(isinstance(i, str) for i in payload)
    return isinstance(payload, (TimeInterval, int)) and not isinstance(payload, bool)


def payload_from_json(modality: Modality, data) -> AnswerPayload:
    """Decode a modality-typed value from its JSON form."""
    if modality is Modality.TEXT:
        if not isinstance(data, str):
            raise ModalityViolationError(f"text answer must be a string, got {data!r}")
        return data
    if modality is Modality.BINARY:
        if not isinstance(data, bool):
            raise ModalityViolationError(f"binary answer must be a boolean, got {data!r}")
        return data
    if modality is Modality.NODE:
        if not isinstance(data, list) or not all(isinstance(i, str) for i in data):
            raise ModalityViolationError(f"node answer must be a list of ids, got {data!r}")
        return frozenset(data)
    if isinstance(data, int) and not isinstance(data, bool):
        return data
    if isinstance(data, dict) and set(data) == {"micros"}:
        return int(data["micros"])
    if isinstance(data, dict) and set(data) == {"start", "end"}:
        return TimeInterval(int(data["start"]), int(data["end"]))
    raise ModalityViolationError(f"time answer must be an instant or interval, got {data!r}")


def payload_to_json(payload: AnswerPayload):
    if payload is None or isinstance(payload, (str, bool)):
        return payload
    if isinstance(payload, frozenset):
        return sorted(payload, key=id_sort_key)
    if isinstance(payload, TimeInterval):
        return {"start": payload.start, "end": payload.end}
    return {"micros": payload}


def payload_repr(payload: AnswerPayload) -> str:
    """Stable human-readable rendering (reports, judge prompts)."""
    if payload is None:
        return "(no answer)"
    if isinstance(payload, bool):
        return "true" if payload else "false"
    if isinstance(payload, str):
        return payload
    if isinstance(payload, frozenset):
        return ", ".join(sorted(payload, key=id_sort_key)) if payload else "(none)"
    if isinstance(payload, TimeInterval):
        return f"{iso_utc(payload.start)} .. {iso_utc(payload.end)}"
    return iso_utc(payload)


@dataclass(frozen=True)
class QueryRecord:
    """One dataset question with its modality-typed gold answer."""

    id: str
    question: str
    modality: Modality
    gold: AnswerPayload
    tags: tuple[str, ...] = ()

    def __post_init__(self):
        if self.gold is None or not payload_fits(self.modality, self.gold):
            raise ModalityViolationError(
                f"{self.id}: gold {self.gold!r} does not fit modality {self.modality.value}"
            )


@dataclass(frozen=True)
class Answer:
    """A generated answer; ``payload=None`` marks abstention."""

    modality: Modality
    payload: AnswerPayload
    rationale: str | None = None

    def __post_init__(self):
        if not payload_fits(self.modality, self.payload):
            raise ModalityViolationError(
                f"payload {self.payload!r} does not fit modality {self.modality.value}"
            )

    @classmethod
    def abstain(cls, modality: Modality) -> "Answer":
        payload: AnswerPayload
        if modality is Modality.BINARY:
            payload = False
        elif modality is Modality.NODE:
            payload = frozenset()
        elif modality is Modality.TEXT:
            payload = "insufficient information"
        else:
            payload = None
        return cls(modality, payload, rationale="insufficient information")


@dataclass(frozen=True)
class AgentConfig:
    """Connection and prompting settings for remote agents."""

    endpoint: str = ""
    model: str = ""
    temperature: float = 0.0
    max_retries: int = 3
    timeout: float = 30.0
    prompt_dir: str | None = None

    def __post_init__(self):
        if self.temperature < 0:
            raise ModalityViolationError("temperature must be non-negative")


def query_from_payload(entry: dict) -> QueryRecord:
    modality = Modality(entry["modality"])
    return QueryRecord(
        id=entry["id"],
        question=entry["question"],
        modality=modality,
        gold=payload_from_json(modality, entry["gold"]),
        tags=tuple(entry.get("tags", [])),
    )


def query_to_payload(query: QueryRecord) -> dict:
    entry = {
        "id": query.id,
        "question": query.question,
        "modality": query.modality.value,
        "gold": payload_to_json(query.gold),
    }
    if query.tags:
        entry["tags"] = list(query.tags)
    return entry


def load_dataset(path: str | Path) -> list[QueryRecord]:
    data = dataset_payload_from_text(Path(path).read_text(encoding="utf-8"))
    queries = [query_from_payload(entry) for entry in data["questions"]]
    seen: set[str] = set()
    for query in queries:
        if query.id in seen:
            raise GraphFormatError(f"duplicate question id {query.id!r}")
        seen.add(query.id)
    return queries


# --- protocols --------------------------------------------------------------


class RelevanceExtractor(Protocol):
    def extract_relevant_info(self, query: QueryRecord, full: EggGraph):
        """Produce the query-relevant time/location/object/event selection."""


class AnswerGenerator(Protocol):
    def generate_answer(self, query: QueryRecord, context: str) -> Answer:
        """Answer the query over a serialized subgraph context."""


class AnswerJudge(Protocol):
    def judge_answer(self, query: QueryRecord, gold: AnswerPayload, predicted: Answer) -> float:
        """Score the predicted answer against gold, in [0, 1]."""


# --- name resolution ---------------------------------------------------------


def resolve_spatial_names(
    g: EggGraph, names: Iterable[str], *, layer: Layer | None = None
) -> frozenset[str]:
    """Map agent-emitted spatial references to node ids.

    Resolution order per reference: existing node id, case-insensitive exact
    name match, then substring match against captions. Ambiguity keeps all
    matches (downstream pruning tolerates supersets); references matching
    nothing are dropped with a warning.
    """
    candidates = [
        node
        for node in g.spatial_nodes.values()
        if layer is None or node.layer is layer
    ]
    resolved: set[str] = set()
    for raw in names:
        ref = raw.strip()
        if not ref:
            continue
        if ref in g.spatial_nodes and (
            layer is None or g.spatial_nodes[ref].layer is layer
        ):
            resolved.add(ref)
            continue
        lowered = ref.lower()
        by_name = {node.id for node in candidates if node.name.lower() == lowered}
        if by_name:
            resolved.update(by_name)
            continue
        by_caption = {
            node.id
            for node in candidates
            if node.caption is not None and lowered in node.caption.lower()
        }
        if by_caption:
            resolved.update(by_caption)
            continue
        logger.warning("dropping unmappable spatial reference %r", raw)
    return frozenset(resolved)


def resolve_event_refs(g: EggGraph, refs: Iterable[str]) -> frozenset[str]:
    """Map agent-emitted event references (ids or summaries) to event ids."""
    resolved: set[str] = set()
    for raw in refs:
        ref = raw.strip()
        if not ref:
            continue
        if ref in g.event_nodes:
            resolved.add(ref)
            continue
        lowered = ref.lower()
        matches = {
            event.id
            for event in g.event_nodes.values()
            if event.summary.lower() == lowered
        }
        if matches:
            resolved.update(matches)
            continue
        logger.warning("dropping unmappable event reference %r", raw)
    return frozenset(resolved)


# --- question/summary text matching -----------------------------------------

#: Function words and scene-generic tokens ignored when matching question
#: text to event summaries.
STOPWORDS = frozenset(
    """
    the a an was were is are be been being did do does done ever never
    to in on at of for with from and or not no
    what which where when who whom how why
    person someone anyone anybody
    can could will would should may might
    i me my you your we us our it its they them their
    this that these those there here
    get got some any all tell describe
    used use uses using time hour day
    """.split()
)

_LETTER_RUN = re.compile(r"[a-zA-Z]+")


def stem(token: str) -> str:
    """Tiny deterministic suffix stripper, just enough to align question verbs
    with summary verbs (makes/making/make, carried/carry, ...)."""
    t = token.lower()
    for suffix in ("ing", "ed", "es", "s"):
        if t.endswith(suffix) and len(t) - len(suffix) >= 2:
            t = t[: len(t) - len(suffix)]
            break
    if t.endswith("y") and len(t) >= 3:
        t = t[:-1] + "i"
    if t.endswith("e") and len(t) >= 3:
        t = t[:-1]
    return t


def content_stems(text: str) -> frozenset[str]:
    """Stems of the non-stopword alphabetic tokens of ``text``."""
    return frozenset(
        stem(token)
        for token in _LETTER_RUN.findall(text)
        if token.lower() not in STOPWORDS
    )


# --- prompt templates --------------------------------------------------------


def load_template(name: str, prompt_dir: str | None = None) -> str:
    """Load a prompt template by file name, from ``prompt_dir`` when given."""
    if prompt_dir is not None:
        return (Path(prompt_dir) / name).read_text(encoding="utf-8")
    return resources.files("eggraph").joinpath("prompts", name).read_text(encoding="utf-8")


def render_template(template: str, values: dict[str, str]) -> str:
    """Substitute ``{NAME}`` placeholders literally (values may contain JSON)."""
    out = template
    for key, value in values.items():
        out = out.replace("{" + key + "}", value)
    return out


def render_answer_prompt(
    question: str, context: str, modality: Modality, prompt_dir: str | None = None
) -> str:
    """The full answer-generation prompt; also used for token accounting."""
    shapes = {
        Modality.BINARY: 'Reply with ONLY {"answer": true} or {"answer": false}.',
        Modality.NODE: 'Reply with ONLY {"answer": [<node id or name>, ...]}; use an empty list when unknown.',
        Modality.TIME: 'Reply with ONLY {"answer": {"start": <micros>, "end": <micros>}} for an interval or {"answer": {"micros": <micros>}} for an instant.',
        Modality.TEXT: 'Reply with ONLY {"answer": "<short answer text>"}.',
    }
    template = load_template("answer.txt", prompt_dir)
    return render_template(
        template,
        {"QUESTION": question, "GRAPH": context, "FORMAT": shapes[modality]},
    )
