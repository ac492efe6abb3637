"""Deterministic rule-based agents.

These agents make the whole question-answering loop runnable offline and
repeatable: identical inputs always produce identical outputs. The extractor
matches question words against scene vocabulary, the generator evaluates a
fixed rule per question shape over the parsed context graph, and the judge
scores by exact match (token F1 for free text).
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field

from ..core import EggGraph, EventNode, TimeInterval, containing_room, id_sort_key
from ..pruning import PruneConfig, RelevantInfo
from ..serialization import parse
from .base import (
    Answer,
    AnswerPayload,
    Modality,
    QueryRecord,
    content_stems,
    stem,
)

_TIME_WINDOW = re.compile(r"between (\d+) and (\d+)")
# Both stems must appear: "coffee" alone also matches rooms named after it.
_COFFEE_MAKING = frozenset({stem("make"), stem("coffee")})


def _normalize_question(text: str) -> str:
    return re.sub(r"[?.!]+$", "", text.strip().lower()).strip()


@dataclass(frozen=True)
class ScriptedRelevanceExtractor:
    """Keyword-rule relevance extraction over the full graph.

    Objects are selected by name mention or semantic-class mention; events by
    sharing a content stem with the question (object vocabulary excluded so
    that naming a mug does not drag in every event touching mugs). Matching
    errs toward supersets, which staged pruning then narrows.
    """

    prune_config: PruneConfig = field(default_factory=PruneConfig)

    def extract_relevant_info(self, query: QueryRecord, full: EggGraph) -> RelevantInfo:
        question = query.question.lower()
        window = full.horizon()
        match = _TIME_WINDOW.search(question)
        if match:
            lo, hi = sorted((int(match.group(1)), int(match.group(2))))
            window = TimeInterval(lo, hi)

        def mentioned(name: str) -> bool:
            return re.search(rf"\b{re.escape(name.lower())}\b", question) is not None

        rooms = frozenset(node.id for node in full.rooms() if mentioned(node.name))
        if not rooms:
            rooms = full.room_ids()

        question_stems = content_stems(query.question)
        objects = set()
        object_vocabulary: set[str] = set()
        for node in full.objects():
            name_stems = content_stems(node.name)
            class_stem = stem(node.semantic_class)
            object_vocabulary |= name_stems | {class_stem}
            if mentioned(node.name) or class_stem in question_stems:
                objects.add(node.id)

        event_keywords = question_stems - object_vocabulary
        events = set()
        for event in full.events():
            if content_stems(event.summary) & event_keywords:
                events.add(event.id)

        # Location questions with no named object need the involved objects
        # kept, or the staged pruning cannot reach any room.
        if question.startswith("where") and events and not objects:
            objects = {e.spatial for e in full.event_edges if e.event in events}

        return RelevantInfo(
            time=window,
            locations=rooms,
            spatial=frozenset(objects),
            events=frozenset(events),
        )


def _find_object(g: EggGraph, name: str):
    lowered = name.strip().lower()
    for node in g.objects():
        if node.name.lower() == lowered:
            return node
    return None


def _events_sorted(g: EggGraph, event_ids) -> list[EventNode]:
    events = [g.event_nodes[i] for i in event_ids]
    events.sort(key=lambda e: (e.interval.start, e.interval.end, id_sort_key(e.id)))
    return events


def _coffee_events(g: EggGraph) -> list[EventNode]:
    return _events_sorted(
        g, (e.id for e in g.events() if _COFFEE_MAKING <= content_stems(e.summary))
    )


def _edges_to(g: EggGraph, object_id: str):
    return [e for e in g.event_edges if e.spatial == object_id]


def _room_at(g: EggGraph, object_id: str, at: int) -> str | None:
    if object_id not in g.spatial_nodes:
        return None
    return containing_room(g, object_id, at)


class ScriptedAnswerGenerator:
    """Fixed rule per question shape, evaluated over the context graph.

    Unrecognized questions and questions whose evidence is absent from the
    context abstain (false / empty set / no time / "insufficient
    information" per modality).
    """

    def generate_answer(self, query: QueryRecord, context: str) -> Answer:
        g = parse(context)
        question = _normalize_question(query.question)
        handler = {
            Modality.BINARY: self._binary,
            Modality.NODE: self._node,
            Modality.TIME: self._time,
            Modality.TEXT: self._text,
        }[query.modality]
        payload = handler(g, question)
        if payload is None:
            return Answer.abstain(query.modality)
        return Answer(query.modality, payload)

    def _binary(self, g: EggGraph, question: str) -> AnswerPayload:
        match = re.fullmatch(r"was the (.+?) ever used to make coffee", question)
        if match:
            node = _find_object(g, match.group(1))
            if node is None:
                return False
            coffee_ids = {e.id for e in _coffee_events(g)}
            return any(edge.event in coffee_ids for edge in _edges_to(g, node.id))

        match = re.fullmatch(r"was the (.+?) ever moved to the (.+)", question)
        if match:
            node = _find_object(g, match.group(1))
            if node is None:
                return False
            destination = f"to the {match.group(2).strip().lower()}."
            return any(
                "moved" in edge.description.lower() and destination in edge.description.lower()
                for edge in _edges_to(g, node.id)
            )

        match = re.fullmatch(r"did anyone ever use the (.+)", question)
        if match:
            node = _find_object(g, match.group(1))
            return node is not None and bool(_edges_to(g, node.id))

        match = re.fullmatch(r"was the (.+?) ever turned on or off", question)
        if match:
            node = _find_object(g, match.group(1))
            if node is None:
                return False
            return any("turned" in edge.description.lower() for edge in _edges_to(g, node.id))

        return None

    def _node(self, g: EggGraph, question: str) -> AnswerPayload:
        if question == "where can i get some coffee":
            rooms = set()
            for event in _coffee_events(g):
                for edge in g.event_edges:
                    if edge.event != event.id:
                        continue
                    room = _room_at(g, edge.spatial, event.interval.start)
                    if room is not None:
                        rooms.add(room)
            return frozenset(rooms)

        match = re.fullmatch(r"which ([a-z]+) was used for making coffee", question)
        if match:
            class_stem = stem(match.group(1))
            coffee_ids = {e.id for e in _coffee_events(g)}
            return frozenset(
                node.id
                for node in g.objects()
                if stem(node.semantic_class) == class_stem
                and any(e.event in coffee_ids for e in _edges_to(g, node.id))
            )

        match = re.fullmatch(r"which ([a-z]+) did someone carry to the (.+)", question)
        if match:
            class_stem = stem(match.group(1))
            destination = f"to the {match.group(2).strip().lower()}."
            return frozenset(
                node.id
                for node in g.objects()
                if stem(node.semantic_class) == class_stem
                and any(
                    "moved" in e.description.lower() and destination in e.description.lower()
                    for e in _edges_to(g, node.id)
                )
            )

        match = re.fullmatch(r"where was the (.+?) at time (\d+)", question)
        if match:
            node = _find_object(g, match.group(1))
            if node is None:
                return frozenset()
            room = _room_at(g, node.id, int(match.group(2)))
            return frozenset() if room is None else frozenset({room})

        return None

    def _time(self, g: EggGraph, question: str) -> AnswerPayload:
        if question == "when did someone first make coffee":
            events = _coffee_events(g)
            return events[0].interval if events else None

        match = re.fullmatch(r"when did someone last interact with the (.+)", question)
        if match:
            node = _find_object(g, match.group(1))
            if node is None:
                return None
            events = _events_sorted(g, (e.event for e in _edges_to(g, node.id)))
            return events[-1].interval if events else None

        return None

    def _text(self, g: EggGraph, question: str) -> AnswerPayload:
        match = re.fullmatch(r"describe the (.+)", question)
        if match:
            node = _find_object(g, match.group(1))
            return node.caption if node is not None else None

        match = re.fullmatch(r"what did the person do with the (.+)", question)
        if match:
            node = _find_object(g, match.group(1))
            if node is None:
                return None
            edges = {e.event: e for e in _edges_to(g, node.id)}
            if not edges:
                return None
            ordered = _events_sorted(g, edges)
            return " ".join(edges[event.id].description for event in ordered)

        return None


def token_f1(gold: str, predicted: str) -> float:
    """Bag-of-tokens F1 between two free-text answers."""
    gold_tokens = Counter(re.findall(r"[a-z0-9]+", gold.lower()))
    pred_tokens = Counter(re.findall(r"[a-z0-9]+", predicted.lower()))
    if not gold_tokens and not pred_tokens:
        return 1.0
    overlap = sum((gold_tokens & pred_tokens).values())
    if overlap == 0:
        return 0.0
    precision = overlap / sum(pred_tokens.values())
    recall = overlap / sum(gold_tokens.values())
    return 2 * precision * recall / (precision + recall)


class ScriptedJudge:
    """Exact-match scoring for binary/node/time answers, token F1 for text."""

    def judge_answer(
        self, query: QueryRecord, gold: AnswerPayload, predicted: Answer
    ) -> float:
        payload = predicted.payload
        if query.modality is Modality.TEXT:
            if payload is None:
                return 0.0
            return token_f1(gold, payload)
        return 1.0 if payload == gold else 0.0
