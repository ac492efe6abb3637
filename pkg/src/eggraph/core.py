"""Data model for event-grounded scene graphs.

A graph holds two node families: spatial nodes (rooms and objects, with
time-invariant attributes plus a per-object history of time-variant
snapshots) and event nodes (interval-scoped interactions with a summary and
an observation position). Spatial edges express interval-stamped room
containment; event edges ground an event to each object it changes,
carrying a per-object description of the change.

Graph values are immutable: every mutating operation returns a new graph.
Timestamps are integer microseconds since the Unix epoch so interval
containment is exact. Instant coverage of a spatial edge is half-open
``[start, end)`` so that back-to-back room stays sharing a boundary never
place an object in two rooms at once; event-in-interval tests use closed
containment.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Iterator, Mapping, NamedTuple, Sequence

from .errors import (
    DuplicateIdError,
    InvariantViolationError,
    SnapshotOutsideIntervalError,
    UnknownSpatialIdError,
)

#: Microseconds since the Unix epoch.
Timestamp = int

_ID_RE = re.compile(r"^[a-z]+_[0-9]+$")


def id_sort_key(node_id: str) -> tuple[str, int]:
    """Sort key ordering ids lexicographically by stem, then numerically.

    ``object_10`` sorts after ``object_2``. Non-conforming ids sort by their
    raw text with suffix -1 so canonical ordering stays total.
    """
    match = _ID_RE.fullmatch(node_id)
    if match is None:
        return (node_id, -1)
    stem, _, num = node_id.rpartition("_")
    return (stem, int(num))


class Layer(str, Enum):
    """Hierarchy layer of a spatial node. Rooms contain objects."""

    ROOM = "room"
    OBJECT = "object"


#: Id prefix expected for each node kind.
LAYER_PREFIX = {Layer.ROOM: "room", Layer.OBJECT: "object"}
EVENT_PREFIX = "event"


@dataclass(frozen=True, order=True)
class TimeInterval:
    """Closed interval of microsecond timestamps, ``start <= end``."""

    start: Timestamp
    end: Timestamp

    def __post_init__(self):
        if self.start < 0 or self.end < 0:
            raise InvariantViolationError(
                f"interval bounds must be non-negative, got [{self.start}, {self.end}]"
            )
        if self.start > self.end:
            raise InvariantViolationError(
                f"interval start {self.start} exceeds end {self.end}"
            )

    def contains(self, other: "TimeInterval") -> bool:
        """Closed containment: ``other`` lies fully within this interval."""
        return self.start <= other.start and other.end <= self.end

    def covers(self, instant: Timestamp) -> bool:
        """Half-open instant coverage ``start <= t < end``.

        Used for piecewise-constant timelines (room containment) so that
        adjacent stays touching at a boundary are unambiguous. A degenerate
        interval covers exactly its single instant.
        """
        if self.start == self.end:
            return instant == self.start
        return self.start <= instant < self.end

    def interior_overlaps(self, other: "TimeInterval") -> bool:
        """True when the two intervals share more than a boundary point."""
        return self.start < other.end and other.start < self.end

    def hull(self, other: "TimeInterval") -> "TimeInterval":
        return TimeInterval(min(self.start, other.start), max(self.end, other.end))

    @property
    def duration(self) -> int:
        return self.end - self.start


@dataclass(frozen=True)
class Position3:
    """Point in meters in a fixed world frame."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        for axis in (self.x, self.y, self.z):
            if not math.isfinite(axis):
                raise InvariantViolationError(f"non-finite position component: {axis!r}")


@dataclass(frozen=True)
class AttributeSnapshot:
    """One recorded value of an object's time-variant attributes."""

    time: Timestamp
    position: Position3
    state: str | None = None

    def __post_init__(self):
        if self.time < 0:
            raise InvariantViolationError(f"snapshot time must be non-negative: {self.time}")


@dataclass(frozen=True)
class SpatialNode:
    """A tracked scene element: a room or an object.

    Rooms carry a static position and never accrue history. Objects carry a
    caption and a strictly time-sorted snapshot history that grows as events
    are grounded to them.
    """

    id: str
    layer: Layer
    name: str
    semantic_class: str
    caption: str | None = None
    static_position: Position3 | None = None
    history: tuple[AttributeSnapshot, ...] = ()


@dataclass(frozen=True)
class EventNode:
    """An observed interaction: interval, free-text summary, and the mean
    camera position from which it was observed."""

    id: str
    interval: TimeInterval
    summary: str
    observation_position: Position3


@dataclass(frozen=True)
class SpatialEdge:
    """Interval-stamped containment: ``parent`` room holds ``child`` object."""

    parent: str
    child: str
    interval: TimeInterval


@dataclass(frozen=True)
class EventEdge:
    """Grounding link from an event to one object it changed.

    ``description`` verbalizes the object's role in the event. The interval
    always equals the event node's interval.
    """

    event: str
    spatial: str
    interval: TimeInterval
    description: str


class EventGrounding(NamedTuple):
    """One grounding entry: the object, its role text, and the first/last
    snapshots recorded during the event."""

    spatial_id: str
    description: str
    first: AttributeSnapshot
    last: AttributeSnapshot


@dataclass(frozen=True)
class Violation:
    """A single validation finding, naming the offending id and rule."""

    rule: str
    subject: str
    message: str
    severity: str = "error"

    def __str__(self) -> str:
        return f"[{self.severity}] {self.rule} ({self.subject}): {self.message}"


@dataclass(frozen=True)
class EggGraph:
    """Immutable event-grounded graph value.

    ``spatial_nodes`` and ``event_nodes`` are id-keyed; edge tuples preserve
    insertion order (canonical ordering is applied at serialization).
    """

    spatial_nodes: Mapping[str, SpatialNode] = field(default_factory=dict)
    event_nodes: Mapping[str, EventNode] = field(default_factory=dict)
    spatial_edges: tuple[SpatialEdge, ...] = ()
    event_edges: tuple[EventEdge, ...] = ()

    @classmethod
    def empty(cls) -> "EggGraph":
        return cls({}, {}, (), ())

    def rooms(self) -> Iterator[SpatialNode]:
        for node_id in sorted(self.spatial_nodes, key=id_sort_key):
            node = self.spatial_nodes[node_id]
            if node.layer is Layer.ROOM:
                yield node

    def objects(self) -> Iterator[SpatialNode]:
        for node_id in sorted(self.spatial_nodes, key=id_sort_key):
            node = self.spatial_nodes[node_id]
            if node.layer is Layer.OBJECT:
                yield node

    def events(self) -> Iterator[EventNode]:
        for node_id in sorted(self.event_nodes, key=id_sort_key):
            yield self.event_nodes[node_id]

    def room_ids(self) -> frozenset[str]:
        return frozenset(n.id for n in self.rooms())

    def object_ids(self) -> frozenset[str]:
        return frozenset(n.id for n in self.objects())

    def horizon(self) -> TimeInterval:
        """Envelope of every recorded time in the graph; [0, 0] when empty."""
        lows: list[int] = []
        highs: list[int] = []
        for event in self.event_nodes.values():
            lows.append(event.interval.start)
            highs.append(event.interval.end)
        for edge in self.spatial_edges:
            lows.append(edge.interval.start)
            highs.append(edge.interval.end)
        for node in self.spatial_nodes.values():
            for snap in node.history:
                lows.append(snap.time)
                highs.append(snap.time)
        if not lows:
            return TimeInterval(0, 0)
        return TimeInterval(min(lows), max(highs))

    def edges_of_event(self, event_id: str) -> tuple[EventEdge, ...]:
        return tuple(e for e in self.event_edges if e.event == event_id)

    def edges_of_object(self, object_id: str) -> tuple[EventEdge, ...]:
        return tuple(e for e in self.event_edges if e.spatial == object_id)


def _node_problems(node: SpatialNode) -> list[str]:
    """Node-local invariant breaches, phrased for error messages."""
    problems = []
    if not _ID_RE.fullmatch(node.id):
        problems.append(f"id {node.id!r} does not match [a-z]+_[0-9]+")
    elif not node.id.startswith(LAYER_PREFIX[node.layer] + "_"):
        problems.append(f"id {node.id!r} does not carry the {node.layer.value!r} prefix")
    if node.layer is Layer.ROOM:
        if node.static_position is None:
            problems.append("room lacks a static position")
        if node.history:
            problems.append("room must not carry a snapshot history")
    else:
        if not node.caption:
            problems.append("object lacks a caption")
        if node.static_position is not None:
            problems.append("object must not carry a static position")
    times = [s.time for s in node.history]
    if any(b <= a for a, b in zip(times, times[1:])):
        problems.append("history is not strictly time-sorted")
    return problems


def add_spatial_node(g: EggGraph, node: SpatialNode) -> EggGraph:
    """Return ``g`` with ``node`` inserted.

    Raises ``DuplicateIdError`` when the id is taken and
    ``InvariantViolationError`` when the node itself is malformed
    (e.g. a room carrying a history).
    """
    if node.id in g.spatial_nodes or node.id in g.event_nodes:
        raise DuplicateIdError(f"node id {node.id!r} already present")
    problems = _node_problems(node)
    if problems:
        raise InvariantViolationError(f"{node.id}: " + "; ".join(problems))
    nodes = dict(g.spatial_nodes)
    nodes[node.id] = node
    return replace(g, spatial_nodes=nodes)


def add_spatial_edge(g: EggGraph, edge: SpatialEdge) -> EggGraph:
    """Return ``g`` with a containment edge added.

    The parent must be a room and the child an object; intervals of edges
    sharing a child may touch but not overlap, so containment stays unique
    at every instant.
    """
    parent = g.spatial_nodes.get(edge.parent)
    child = g.spatial_nodes.get(edge.child)
    if parent is None or parent.layer is not Layer.ROOM:
        raise UnknownSpatialIdError(f"edge parent {edge.parent!r} is not a room in the graph")
    if child is None or child.layer is not Layer.OBJECT:
        raise UnknownSpatialIdError(f"edge child {edge.child!r} is not an object in the graph")
    for existing in g.spatial_edges:
        if existing == edge:
            raise InvariantViolationError(
                f"duplicate containment edge {edge.parent}->{edge.child} "
                f"[{edge.interval.start}, {edge.interval.end}]"
            )
        if existing.child == edge.child and existing.interval.interior_overlaps(edge.interval):
            raise InvariantViolationError(
                f"object {edge.child} would be contained by {existing.parent} and "
                f"{edge.parent} over overlapping intervals"
            )
    return replace(g, spatial_edges=g.spatial_edges + (edge,))


def _insert_snapshot(
    history: tuple[AttributeSnapshot, ...], snap: AttributeSnapshot
) -> tuple[AttributeSnapshot, ...]:
    """Insert keeping strict time order; an equal-time entry is replaced."""
    out: list[AttributeSnapshot] = []
    placed = False
    for existing in history:
        if existing.time == snap.time:
            out.append(snap)
            placed = True
        elif not placed and existing.time > snap.time:
            out.extend((snap, existing))
            placed = True
        else:
            out.append(existing)
    if not placed:
        out.append(snap)
    return tuple(out)


def ground_event(
    g: EggGraph, event: EventNode, groundings: Sequence[EventGrounding | tuple]
) -> EggGraph:
    """Return ``g`` with ``event`` added and grounded to the given objects.

    One event edge is created per grounding, stamped with the event's
    interval; both snapshots of each grounding are merged into the object's
    history, preserving strict time order. An empty grounding list is
    allowed (flagged later by :func:`validate` as a warning).
    """
    if event.id in g.event_nodes or event.id in g.spatial_nodes:
        raise DuplicateIdError(f"event id {event.id!r} already present")
    if not _ID_RE.fullmatch(event.id) or not event.id.startswith(EVENT_PREFIX + "_"):
        raise InvariantViolationError(f"event id {event.id!r} must look like event_<n>")

    entries = [EventGrounding(*entry) for entry in groundings]
    seen: set[str] = set()
    for entry in entries:
        node = g.spatial_nodes.get(entry.spatial_id)
        if node is None or node.layer is not Layer.OBJECT:
            raise UnknownSpatialIdError(
                f"grounding target {entry.spatial_id!r} is not an object in the graph"
            )
        if entry.spatial_id in seen:
            raise InvariantViolationError(
                f"object {entry.spatial_id} grounded twice by {event.id}"
            )
        seen.add(entry.spatial_id)
        if entry.first.time > entry.last.time:
            raise SnapshotOutsideIntervalError(
                f"{event.id}/{entry.spatial_id}: first snapshot after last"
            )
        for snap in (entry.first, entry.last):
            if not (event.interval.start <= snap.time <= event.interval.end):
                raise SnapshotOutsideIntervalError(
                    f"{event.id}/{entry.spatial_id}: snapshot at {snap.time} outside "
                    f"[{event.interval.start}, {event.interval.end}]"
                )

    spatial_nodes = dict(g.spatial_nodes)
    edges = list(g.event_edges)
    for entry in entries:
        node = spatial_nodes[entry.spatial_id]
        history = _insert_snapshot(node.history, entry.first)
        history = _insert_snapshot(history, entry.last)
        spatial_nodes[entry.spatial_id] = replace(node, history=history)
        edges.append(
            EventEdge(
                event=event.id,
                spatial=entry.spatial_id,
                interval=event.interval,
                description=entry.description,
            )
        )
    event_nodes = dict(g.event_nodes)
    event_nodes[event.id] = event
    return replace(
        g, spatial_nodes=spatial_nodes, event_nodes=event_nodes, event_edges=tuple(edges)
    )


def validate(g: EggGraph) -> list[Violation]:
    """Check every structural invariant, returning one finding per breach.

    An empty list means the graph is sound. Zero-grounding events are
    reported with ``severity="warning"``; everything else is an error.
    """
    findings: list[Violation] = []

    for node_id in g.spatial_nodes.keys() & g.event_nodes.keys():
        findings.append(
            Violation("cross-collection-duplicate", node_id, "id used by both a spatial and an event node")
        )

    for node in g.spatial_nodes.values():
        for problem in _node_problems(node):
            rule = "room-shape" if node.layer is Layer.ROOM else "object-shape"
            if "id " in problem:
                rule = "id-format"
            elif "history is not" in problem:
                rule = "history-order"
            findings.append(Violation(rule, node.id, problem))

    for event in g.event_nodes.values():
        if not _ID_RE.fullmatch(event.id) or not event.id.startswith(EVENT_PREFIX + "_"):
            findings.append(Violation("id-format", event.id, "event id must look like event_<n>"))
        if not event.summary.strip():
            findings.append(Violation("summary-empty", event.id, "event summary is empty"))

    seen_spatial_edges: set[SpatialEdge] = set()
    for edge in g.spatial_edges:
        subject = f"{edge.parent}->{edge.child}"
        parent = g.spatial_nodes.get(edge.parent)
        child = g.spatial_nodes.get(edge.child)
        if parent is None or child is None:
            findings.append(Violation("dangling-spatial-edge", subject, "an endpoint is missing"))
            continue
        if parent.layer is not Layer.ROOM or child.layer is not Layer.OBJECT:
            findings.append(
                Violation("edge-layer", subject, "containment must run room -> object")
            )
        if edge in seen_spatial_edges:
            findings.append(Violation("duplicate-spatial-edge", subject, "identical edge repeated"))
        seen_spatial_edges.add(edge)

    # Overlap analysis only over well-formed edges; dangling ones are already
    # reported and would cascade noise here.
    by_child: dict[str, list[SpatialEdge]] = {}
    for edge in g.spatial_edges:
        if edge.parent in g.spatial_nodes and edge.child in g.spatial_nodes:
            by_child.setdefault(edge.child, []).append(edge)
    for child_id, edges in by_child.items():
        edges = sorted(edges, key=lambda e: (e.interval.start, e.interval.end))
        for a, b in zip(edges, edges[1:]):
            if a.interval.interior_overlaps(b.interval):
                findings.append(
                    Violation(
                        "containment-overlap",
                        child_id,
                        f"contained by {a.parent} and {b.parent} over overlapping intervals",
                    )
                )

    grounded: dict[str, int] = {event_id: 0 for event_id in g.event_nodes}
    seen_pairs: set[tuple[str, str]] = set()
    for edge in g.event_edges:
        subject = f"{edge.event}->{edge.spatial}"
        event = g.event_nodes.get(edge.event)
        target = g.spatial_nodes.get(edge.spatial)
        if event is None or target is None:
            findings.append(Violation("dangling-event-edge", subject, "an endpoint is missing"))
            continue
        grounded[edge.event] += 1
        if target.layer is not Layer.OBJECT:
            findings.append(Violation("event-edge-layer", subject, "events ground objects, not rooms"))
        if edge.interval != event.interval:
            findings.append(
                Violation(
                    "interval-mismatch",
                    subject,
                    f"edge interval [{edge.interval.start}, {edge.interval.end}] differs from "
                    f"event interval [{event.interval.start}, {event.interval.end}]",
                )
            )
        pair = (edge.event, edge.spatial)
        if pair in seen_pairs:
            findings.append(Violation("duplicate-event-edge", subject, "pair grounded twice"))
        seen_pairs.add(pair)

    for event_id, count in grounded.items():
        if count == 0:
            findings.append(
                Violation("zero-grounding", event_id, "event grounds no object", severity="warning")
            )

    return findings


def validation_errors(g: EggGraph) -> list[Violation]:
    """Error-severity findings only (warnings are advisory)."""
    return [v for v in validate(g) if v.severity == "error"]


def events_in(g: EggGraph, interval: TimeInterval) -> frozenset[str]:
    """Ids of events whose interval lies fully inside ``interval``."""
    return frozenset(
        event.id for event in g.event_nodes.values() if interval.contains(event.interval)
    )


def containing_room(g: EggGraph, object_id: str, at: Timestamp) -> str | None:
    """The room containing ``object_id`` at instant ``at``, if any.

    Coverage is half-open, so at a transition boundary the object is already
    in its next room.
    """
    node = g.spatial_nodes.get(object_id)
    if node is None or node.layer is not Layer.OBJECT:
        raise UnknownSpatialIdError(f"{object_id!r} is not an object in the graph")
    covering = [e for e in g.spatial_edges if e.child == object_id and e.interval.covers(at)]
    if not covering:
        return None
    # A valid graph has at most one cover; pick deterministically regardless.
    covering.sort(key=lambda e: (e.interval.start, id_sort_key(e.parent)))
    return covering[-1].parent


class GraphBuilder:
    """Single-writer convenience wrapper over the pure construction ops."""

    def __init__(self):
        self._graph = EggGraph.empty()

    def add_room(
        self,
        room_id: str,
        name: str,
        position: Position3,
        semantic_class: str = "room",
        caption: str | None = None,
    ) -> "GraphBuilder":
        node = SpatialNode(
            id=room_id,
            layer=Layer.ROOM,
            name=name,
            semantic_class=semantic_class,
            caption=caption,
            static_position=position,
        )
        self._graph = add_spatial_node(self._graph, node)
        return self

    def add_object(
        self, object_id: str, name: str, semantic_class: str, caption: str
    ) -> "GraphBuilder":
        node = SpatialNode(
            id=object_id,
            layer=Layer.OBJECT,
            name=name,
            semantic_class=semantic_class,
            caption=caption,
        )
        self._graph = add_spatial_node(self._graph, node)
        return self

    def add_containment(
        self, room_id: str, object_id: str, interval: TimeInterval
    ) -> "GraphBuilder":
        self._graph = add_spatial_edge(self._graph, SpatialEdge(room_id, object_id, interval))
        return self

    def ground_event(
        self, event: EventNode, groundings: Iterable[EventGrounding | tuple] = ()
    ) -> "GraphBuilder":
        self._graph = ground_event(self._graph, event, list(groundings))
        return self

    def build(self) -> EggGraph:
        return self._graph
