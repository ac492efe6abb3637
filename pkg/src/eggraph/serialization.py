"""Canonical JSON serialization, ingestion formats, and token counting.

The serialized form is byte-stable: collections are sorted by id (stem
lexicographically, then numeric suffix), keys are emitted in a fixed order,
and timestamps carry both an ISO-8601 UTC rendering and the raw microsecond
integer. Equal graphs therefore serialize to identical text, which makes
prompt contents reproducible and golden-file tests meaningful.

Ingestion consumes two documents: a scene manifest (rooms, objects, room-stay
timelines) and a JSONL stream of pre-captioned event records. All formats are
validated against the JSON Schemas shipped under ``schemas/``.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable, Sequence

import jsonschema

from .core import (
    AttributeSnapshot,
    EggGraph,
    EventGrounding,
    EventNode,
    GraphBuilder,
    Position3,
    TimeInterval,
    Timestamp,
    id_sort_key,
    validation_errors,
)
from .errors import EggError, GraphFormatError, InvalidGraphError

_EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)
_STRUCTURAL = '{}[]:,"'
_WORD_RUN = re.compile(r'[^\s{}\[\]:,"]+')


def _schema(name: str) -> dict:
    text = resources.files("eggraph").joinpath("schemas", name).read_text(encoding="utf-8")
    return json.loads(text)


_GRAPH_SCHEMA = _schema("graph.egg.schema.json")
_MANIFEST_SCHEMA = _schema("scene.manifest.schema.json")
_RECORD_SCHEMA = _schema("event.record.schema.json")
_DATASET_SCHEMA = _schema("dataset.qa.schema.json")


def iso_utc(micros: Timestamp) -> str:
    """ISO-8601 UTC rendering with microsecond precision."""
    return (_EPOCH + timedelta(microseconds=micros)).isoformat(timespec="microseconds")


def _timestamp_payload(micros: Timestamp) -> dict:
    return {"iso": iso_utc(micros), "micros": micros}


def _interval_payload(interval: TimeInterval) -> dict:
    return {
        "start": _timestamp_payload(interval.start),
        "end": _timestamp_payload(interval.end),
    }


def _position_payload(p: Position3) -> dict:
    return {"x": p.x, "y": p.y, "z": p.z}


def graph_payload(g: EggGraph, *, omit_event_edges: bool = False) -> dict:
    """Canonical dict form of a graph (see :func:`serialize`)."""
    rooms = []
    for node in g.rooms():
        entry: dict = {
            "id": node.id,
            "name": node.name,
            "semantic_class": node.semantic_class,
        }
        if node.caption is not None:
            entry["caption"] = node.caption
        entry["position"] = _position_payload(node.static_position)
        rooms.append(entry)

    objects = []
    for node in g.objects():
        history = []
        for snap in node.history:
            item: dict = {
                "time": _timestamp_payload(snap.time),
                "position": _position_payload(snap.position),
            }
            if snap.state is not None:
                item["state"] = snap.state
            history.append(item)
        objects.append(
            {
                "id": node.id,
                "name": node.name,
                "semantic_class": node.semantic_class,
                "caption": node.caption,
                "history": history,
            }
        )

    events = []
    for event in g.events():
        entry = {
            "id": event.id,
            "interval": _interval_payload(event.interval),
            "summary": event.summary,
            "observation_position": _position_payload(event.observation_position),
        }
        if not omit_event_edges:
            involved = sorted(
                (e for e in g.event_edges if e.event == event.id),
                key=lambda e: id_sort_key(e.spatial),
            )
            entry["involved"] = [
                {"object_id": e.spatial, "description": e.description} for e in involved
            ]
        events.append(entry)

    spatial_edges = [
        {"parent": e.parent, "child": e.child, "interval": _interval_payload(e.interval)}
        for e in sorted(
            g.spatial_edges,
            key=lambda e: (id_sort_key(e.parent), id_sort_key(e.child), e.interval),
        )
    ]
    if omit_event_edges:
        event_edges = []
    else:
        event_edges = [
            {
                "event": e.event,
                "spatial": e.spatial,
                "interval": _interval_payload(e.interval),
                "description": e.description,
            }
            for e in sorted(
                g.event_edges, key=lambda e: (id_sort_key(e.event), id_sort_key(e.spatial))
            )
        ]

    return {
        "rooms": rooms,
        "objects": objects,
        "events": events,
        "spatial_edges": spatial_edges,
        "event_edges": event_edges,
    }


def serialize(g, *, omit_event_edges: bool = False) -> str:
    """Render a graph (or anything exposing ``materialize()``) to canonical JSON.

    The graph must be free of error-severity validation findings. With
    ``omit_event_edges`` the grounding links are left out of the text while
    the graph itself stays intact, which reproduces the edge-free prompt
    rendering.
    """
    if hasattr(g, "materialize"):
        g = g.materialize()
    findings = validation_errors(g)
    if findings:
        raise InvalidGraphError(
            f"refusing to serialize an invalid graph ({len(findings)} finding(s))", findings
        )
    payload = graph_payload(g, omit_event_edges=omit_event_edges)
    return json.dumps(payload, indent=2, ensure_ascii=False) + "\n"


def _check_timestamp(entry: dict, where: str) -> Timestamp:
    micros = entry["micros"]
    expected = iso_utc(micros)
    if entry["iso"] != expected:
        raise GraphFormatError(
            f"iso rendering {entry['iso']!r} does not match micros={micros} ({expected})",
            location=where,
        )
    return micros


def _parse_interval(entry: dict, where: str) -> TimeInterval:
    start = _check_timestamp(entry["start"], where + ".start")
    end = _check_timestamp(entry["end"], where + ".end")
    try:
        return TimeInterval(start, end)
    except EggError as exc:
        raise GraphFormatError(str(exc), location=where) from exc


def _parse_position(entry: dict) -> Position3:
    return Position3(entry["x"], entry["y"], entry["z"])


def parse(text: str) -> EggGraph:
    """Parse canonical graph JSON back into a graph value.

    Rejects malformed syntax, unknown keys, schema violations, inconsistent
    inline groundings, and any graph that fails integrity validation.
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GraphFormatError(f"malformed JSON: {exc}") from exc
    try:
        jsonschema.validate(data, _GRAPH_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise GraphFormatError(exc.message, location="$." + ".".join(str(p) for p in exc.absolute_path)) from exc

    from .core import EventEdge, Layer, SpatialEdge, SpatialNode  # local to keep header lean

    spatial_nodes: dict[str, SpatialNode] = {}
    for entry in data["rooms"]:
        spatial_nodes[entry["id"]] = SpatialNode(
            id=entry["id"],
            layer=Layer.ROOM,
            name=entry["name"],
            semantic_class=entry["semantic_class"],
            caption=entry.get("caption"),
            static_position=_parse_position(entry["position"]),
        )
    for entry in data["objects"]:
        history = tuple(
            AttributeSnapshot(
                time=_check_timestamp(item["time"], f"objects[{entry['id']}].history"),
                position=_parse_position(item["position"]),
                state=item.get("state"),
            )
            for item in entry["history"]
        )
        spatial_nodes[entry["id"]] = SpatialNode(
            id=entry["id"],
            layer=Layer.OBJECT,
            name=entry["name"],
            semantic_class=entry["semantic_class"],
            caption=entry["caption"],
            history=history,
        )

    event_nodes: dict[str, EventNode] = {}
    inline: dict[str, list[tuple[str, str]]] = {}
    for entry in data["events"]:
        event_nodes[entry["id"]] = EventNode(
            id=entry["id"],
            interval=_parse_interval(entry["interval"], f"events[{entry['id']}].interval"),
            summary=entry["summary"],
            observation_position=_parse_position(entry["observation_position"]),
        )
        if "involved" in entry:
            inline[entry["id"]] = [
                (item["object_id"], item["description"]) for item in entry["involved"]
            ]

    spatial_edges = tuple(
        SpatialEdge(
            parent=entry["parent"],
            child=entry["child"],
            interval=_parse_interval(entry["interval"], "spatial_edges"),
        )
        for entry in data["spatial_edges"]
    )
    event_edges = tuple(
        EventEdge(
            event=entry["event"],
            spatial=entry["spatial"],
            interval=_parse_interval(entry["interval"], "event_edges"),
            description=entry["description"],
        )
        for entry in data["event_edges"]
    )

    graph = EggGraph(
        spatial_nodes=spatial_nodes,
        event_nodes=event_nodes,
        spatial_edges=spatial_edges,
        event_edges=event_edges,
    )

    if inline or event_edges:
        derived = {
            event_id: sorted(
                ((e.spatial, e.description) for e in event_edges if e.event == event_id),
                key=lambda pair: id_sort_key(pair[0]),
            )
            for event_id in event_nodes
        }
        stated = {event_id: inline.get(event_id, []) for event_id in event_nodes}
        for event_id in event_nodes:
            if stated[event_id] != derived[event_id]:
                raise GraphFormatError(
                    "inline groundings disagree with event_edges",
                    location=f"events[{event_id}].involved",
                )

    findings = validation_errors(graph)
    if findings:
        raise InvalidGraphError(
            f"parsed graph fails integrity validation ({len(findings)} finding(s))", findings
        )
    return graph


def count_tokens(text: str, tokenizer: Callable[[str], int] | None = None) -> int:
    """Approximate token count of serialized text.

    The default counts maximal runs of characters that are neither whitespace
    nor structural punctuation, plus one per structural punctuation character
    (``{}[]:,"``); pass ``tokenizer`` to measure with a real model tokenizer
    instead.
    """
    if tokenizer is not None:
        return tokenizer(text)
    runs = len(_WORD_RUN.findall(text))
    structural = sum(text.count(c) for c in _STRUCTURAL)
    return runs + structural


# --- ingestion formats -----------------------------------------------------


@dataclass(frozen=True)
class RoomSpec:
    id: str
    name: str
    position: Position3


@dataclass(frozen=True)
class RoomStay:
    room_id: str
    interval: TimeInterval


@dataclass(frozen=True)
class ObjectSpec:
    id: str
    name: str
    semantic_class: str
    caption: str
    initial_room: str
    transitions: tuple[RoomStay, ...] = ()


@dataclass(frozen=True)
class SceneManifest:
    """Static scene description: rooms, objects, and room-stay timelines."""

    rooms: tuple[RoomSpec, ...]
    objects: tuple[ObjectSpec, ...]
    horizon: TimeInterval | None = None


@dataclass(frozen=True)
class RecordGrounding:
    spatial_id: str
    description: str
    first: AttributeSnapshot
    last: AttributeSnapshot


@dataclass(frozen=True)
class EventRecord:
    """One pre-captioned observed event, ready for grounding."""

    event_id: str
    interval: TimeInterval
    summary: str
    camera_positions: tuple[Position3, ...]
    groundings: tuple[RecordGrounding, ...]
    room_hint: str | None = None


def _plain_interval(entry: dict, where: str) -> TimeInterval:
    try:
        return TimeInterval(entry["start"], entry["end"])
    except EggError as exc:
        raise GraphFormatError(str(exc), location=where) from exc


def manifest_from_payload(data: dict) -> SceneManifest:
    try:
        jsonschema.validate(data, _MANIFEST_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise GraphFormatError(exc.message, location="$." + ".".join(str(p) for p in exc.absolute_path)) from exc
    rooms = tuple(
        RoomSpec(entry["id"], entry["name"], _parse_position(entry["position"]))
        for entry in data["rooms"]
    )
    objects = []
    for entry in data["objects"]:
        stays = tuple(
            RoomStay(t["room_id"], _plain_interval(t["interval"], f"objects[{entry['id']}].room_transitions"))
            for t in entry.get("room_transitions", [])
        )
        ordered = sorted(stays, key=lambda s: (s.interval.start, s.interval.end))
        for a, b in zip(ordered, ordered[1:]):
            if a.interval.interior_overlaps(b.interval):
                raise GraphFormatError(
                    "room transitions overlap",
                    location=f"objects[{entry['id']}].room_transitions",
                )
        objects.append(
            ObjectSpec(
                id=entry["id"],
                name=entry["name"],
                semantic_class=entry["semantic_class"],
                caption=entry["caption"],
                initial_room=entry["initial_room"],
                transitions=stays,
            )
        )
    horizon = None
    if "horizon" in data:
        horizon = _plain_interval(data["horizon"], "$.horizon")
    return SceneManifest(rooms=rooms, objects=tuple(objects), horizon=horizon)


def load_manifest(path: str | Path) -> SceneManifest:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise GraphFormatError(f"malformed JSON in {path}: {exc}") from exc
    return manifest_from_payload(data)


def _snapshot_from_payload(entry: dict) -> AttributeSnapshot:
    return AttributeSnapshot(
        time=entry["time"],
        position=_parse_position(entry["position"]),
        state=entry.get("state"),
    )


def record_from_payload(data: dict, *, where: str = "record") -> EventRecord:
    try:
        jsonschema.validate(data, _RECORD_SCHEMA)
    except jsonschema.ValidationError as exc:
        path = ".".join(str(p) for p in exc.absolute_path)
        raise GraphFormatError(exc.message, location=f"{where}.{path}" if path else where) from exc
    interval = _plain_interval(data["interval"], f"{where}.interval")
    groundings = []
    for entry in data["groundings"]:
        first = _snapshot_from_payload(entry["first"])
        last = _snapshot_from_payload(entry["last"])
        groundings.append(
            RecordGrounding(entry["spatial_id"], entry["description"], first, last)
        )
    return EventRecord(
        event_id=data["event_id"],
        interval=interval,
        summary=data["summary"],
        camera_positions=tuple(_parse_position(p) for p in data["camera_positions"]),
        groundings=tuple(groundings),
        room_hint=data.get("room_hint"),
    )


def records_from_jsonl(text: str) -> list[EventRecord]:
    """Parse one event record per non-empty line, reporting line numbers."""
    records = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            data = json.loads(line)
        except json.JSONDecodeError as exc:
            raise GraphFormatError(f"malformed JSON: {exc}", location=f"line {lineno}") from exc
        records.append(record_from_payload(data, where=f"line {lineno}"))
    return records


def load_records(path: str | Path) -> list[EventRecord]:
    return records_from_jsonl(Path(path).read_text(encoding="utf-8"))


def mean_position(positions: Sequence[Position3]) -> Position3:
    """Arithmetic mean per axis; the event node's observation position."""
    n = len(positions)
    return Position3(
        sum(p.x for p in positions) / n,
        sum(p.y for p in positions) / n,
        sum(p.z for p in positions) / n,
    )


def ingest(manifest: SceneManifest, records: Iterable[EventRecord]) -> EggGraph:
    """Build a graph from a manifest and a stream of event records.

    Containment edges come from each object's initial room and transitions;
    an object that never moves is contained for the whole observation
    horizon. Records are grounded in interval order, and each event node's
    observation position is the mean of the record's camera positions.
    """
    records = list(records)
    seen_ids: set[str] = set()
    for record in records:
        if record.event_id in seen_ids:
            raise GraphFormatError(f"duplicate event_id {record.event_id!r}")
        seen_ids.add(record.event_id)

    horizon = manifest.horizon
    if horizon is None:
        lows = [r.interval.start for r in records]
        highs = [r.interval.end for r in records]
        for obj in manifest.objects:
            for stay in obj.transitions:
                lows.append(stay.interval.start)
                highs.append(stay.interval.end)
        horizon = TimeInterval(min(lows), max(highs)) if lows else TimeInterval(0, 0)

    builder = GraphBuilder()
    for room in manifest.rooms:
        builder.add_room(room.id, room.name, room.position)
    for obj in manifest.objects:
        builder.add_object(obj.id, obj.name, obj.semantic_class, obj.caption)
        first_change = obj.transitions[0].interval.start if obj.transitions else horizon.end
        builder.add_containment(
            obj.initial_room, obj.id, TimeInterval(horizon.start, first_change)
        )
        for stay in obj.transitions:
            builder.add_containment(stay.room_id, obj.id, stay.interval)

    for record in sorted(records, key=lambda r: (r.interval, r.event_id)):
        event = EventNode(
            id=record.event_id,
            interval=record.interval,
            summary=record.summary,
            observation_position=mean_position(record.camera_positions),
        )
        groundings = [
            EventGrounding(g.spatial_id, g.description, g.first, g.last)
            for g in record.groundings
        ]
        builder.ground_event(event, groundings)
    return builder.build()


def manifest_to_payload(manifest: SceneManifest) -> dict:
    payload: dict = {}
    if manifest.horizon is not None:
        payload["horizon"] = {"start": manifest.horizon.start, "end": manifest.horizon.end}
    payload["rooms"] = [
        {"id": room.id, "name": room.name, "position": _position_payload(room.position)}
        for room in manifest.rooms
    ]
    payload["objects"] = [
        {
            "id": obj.id,
            "name": obj.name,
            "semantic_class": obj.semantic_class,
            "caption": obj.caption,
            "initial_room": obj.initial_room,
            "room_transitions": [
                {
                    "room_id": stay.room_id,
                    "interval": {"start": stay.interval.start, "end": stay.interval.end},
                }
                for stay in obj.transitions
            ],
        }
        for obj in manifest.objects
    ]
    return payload


def _snapshot_to_payload(snap: AttributeSnapshot) -> dict:
    payload: dict = {"time": snap.time, "position": _position_payload(snap.position)}
    if snap.state is not None:
        payload["state"] = snap.state
    return payload


def record_to_payload(record: EventRecord) -> dict:
    payload: dict = {
        "event_id": record.event_id,
        "interval": {"start": record.interval.start, "end": record.interval.end},
        "summary": record.summary,
        "camera_positions": [_position_payload(p) for p in record.camera_positions],
        "groundings": [
            {
                "spatial_id": g.spatial_id,
                "description": g.description,
                "first": _snapshot_to_payload(g.first),
                "last": _snapshot_to_payload(g.last),
            }
            for g in record.groundings
        ],
    }
    if record.room_hint is not None:
        payload["room_hint"] = record.room_hint
    return payload


def dataset_payload_from_text(text: str) -> dict:
    """Validate and return a QA dataset document (used by agents/evalharness)."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GraphFormatError(f"malformed JSON: {exc}") from exc
    try:
        jsonschema.validate(data, _DATASET_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise GraphFormatError(exc.message, location="$." + ".".join(str(p) for p in exc.absolute_path)) from exc
    return data
