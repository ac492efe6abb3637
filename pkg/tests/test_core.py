"""Graph data model: construction, grounding, validation, and queries."""

import random

import pytest

from eggraph import (
    AttributeSnapshot,
    EggGraph,
    EventEdge,
    EventGrounding,
    EventNode,
    GraphBuilder,
    Layer,
    Position3,
    SpatialEdge,
    SpatialNode,
    TimeInterval,
    add_spatial_node,
    containing_room,
    events_in,
    ground_event,
    serialize,
    validate,
)
from eggraph.errors import (
    DuplicateIdError,
    InvariantViolationError,
    SnapshotOutsideIntervalError,
    UnknownSpatialIdError,
)

from .oracles import random_graph


def _object(object_id: str, name: str = "thing") -> SpatialNode:
    return SpatialNode(
        id=object_id,
        layer=Layer.OBJECT,
        name=name,
        semantic_class="widget",
        caption="A test widget.",
    )


def _fix0() -> EggGraph:
    builder = GraphBuilder()
    builder.add_room("room_1", "north room", Position3(0, 0, 0))
    builder.add_room("room_2", "south room", Position3(8, 0, 0))
    for i in range(1, 5):
        builder.add_object(f"object_{i}", f"thing {i}", "widget", f"A widget {i}.")
        builder.add_containment("room_1" if i < 3 else "room_2", f"object_{i}", TimeInterval(0, 1000))
    return builder.build()


class TestTimeInterval:
    def test_rejects_negative_and_reversed(self):
        with pytest.raises(InvariantViolationError):
            TimeInterval(-1, 5)
        with pytest.raises(InvariantViolationError):
            TimeInterval(5, 4)

    def test_closed_containment(self):
        assert TimeInterval(0, 250).contains(TimeInterval(100, 200))
        assert TimeInterval(100, 200).contains(TimeInterval(100, 200))
        assert not TimeInterval(0, 150).contains(TimeInterval(100, 200))

    def test_halfopen_instant_coverage(self):
        edge = TimeInterval(0, 250)
        assert edge.covers(0)
        assert edge.covers(249)
        assert not edge.covers(250)
        degenerate = TimeInterval(5, 5)
        assert degenerate.covers(5)
        assert not degenerate.covers(6)

    def test_interior_overlap_ignores_shared_boundary(self):
        assert not TimeInterval(0, 250).interior_overlaps(TimeInterval(250, 1000))
        assert TimeInterval(0, 251).interior_overlaps(TimeInterval(250, 1000))


def test_position_requires_finite_components():
    with pytest.raises(InvariantViolationError):
        Position3(float("nan"), 0.0, 0.0)


class TestAddSpatialNode:
    def test_insert_into_empty_graph(self):
        g = add_spatial_node(
            EggGraph.empty(),
            SpatialNode("room_1", Layer.ROOM, "north room", "room", static_position=Position3(0, 0, 0)),
        )
        assert len(g.spatial_nodes) == 1

    def test_duplicate_rejected(self):
        g = add_spatial_node(EggGraph.empty(), _object("object_1"))
        with pytest.raises(DuplicateIdError):
            add_spatial_node(g, _object("object_1"))

    def test_fix1_gains_a_fifth_object(self, fix1):
        g = add_spatial_node(fix1, _object("object_5", "spoon"))
        assert len(list(g.objects())) == 5
        assert len(list(fix1.objects())) == 4  # original untouched

    def test_room_with_history_rejected(self):
        bad = SpatialNode(
            "room_1",
            Layer.ROOM,
            "north room",
            "room",
            static_position=Position3(0, 0, 0),
            history=(AttributeSnapshot(1, Position3(0, 0, 0)),),
        )
        with pytest.raises(InvariantViolationError):
            add_spatial_node(EggGraph.empty(), bad)

    def test_object_without_caption_rejected(self):
        bad = SpatialNode("object_1", Layer.OBJECT, "thing", "widget")
        with pytest.raises(InvariantViolationError):
            add_spatial_node(EggGraph.empty(), bad)

    def test_prefix_must_match_layer(self):
        bad = _object("room_9")
        with pytest.raises(InvariantViolationError):
            add_spatial_node(EggGraph.empty(), bad)


class TestGroundEvent:
    def _event(self, interval=TimeInterval(100, 200)) -> EventNode:
        return EventNode("event_1", interval, "something happens", Position3(0, 0, 1))

    def _grounding(self, object_id, interval=TimeInterval(100, 200)):
        return EventGrounding(
            object_id,
            "The thing was handled.",
            AttributeSnapshot(interval.start, Position3(0, 0, 1)),
            AttributeSnapshot(interval.end, Position3(1, 0, 1)),
        )

    def test_counts_after_grounding_two_objects(self):
        g = ground_event(
            _fix0(),
            self._event(),
            [self._grounding("object_1"), self._grounding("object_4")],
        )
        assert len(g.event_nodes) == 1
        assert len(g.event_edges) == 2
        assert len(g.spatial_nodes["object_1"].history) == 2
        assert len(g.spatial_nodes["object_4"].history) == 2
        assert len(g.spatial_nodes["object_2"].history) == 0

    def test_zero_groundings_allowed_but_warned(self):
        g = ground_event(_fix0(), self._event(), [])
        assert len(g.event_nodes) == 1
        assert len(g.event_edges) == 0
        findings = validate(g)
        assert [f.rule for f in findings] == ["zero-grounding"]
        assert findings[0].severity == "warning"

    def test_room_target_rejected(self):
        with pytest.raises(UnknownSpatialIdError):
            ground_event(_fix0(), self._event(), [self._grounding("room_1")])

    def test_unknown_target_rejected(self):
        with pytest.raises(UnknownSpatialIdError):
            ground_event(_fix0(), self._event(), [self._grounding("object_9")])

    def test_snapshot_outside_interval_rejected(self):
        bad = EventGrounding(
            "object_1",
            "The thing was handled.",
            AttributeSnapshot(50, Position3(0, 0, 1)),
            AttributeSnapshot(150, Position3(0, 0, 1)),
        )
        with pytest.raises(SnapshotOutsideIntervalError):
            ground_event(_fix0(), self._event(), [bad])

    def test_duplicate_event_id_rejected(self):
        g = ground_event(_fix0(), self._event(), [])
        with pytest.raises(DuplicateIdError):
            ground_event(g, self._event(TimeInterval(300, 400)), [])

    def test_histories_stay_strictly_sorted(self):
        for seed in range(25):
            g = random_graph(seed)
            for node in g.objects():
                times = [snap.time for snap in node.history]
                assert times == sorted(times)
                assert len(times) == len(set(times))

    def test_order_insensitive_for_disjoint_events(self, fix1):
        from eggraph.fixtures import fix1_manifest, fix1_records
        from eggraph.serialization import ingest

        records = fix1_records()
        rng = random.Random(7)
        for _ in range(5):
            shuffled = records[:]
            rng.shuffle(shuffled)
            rebuilt = ingest(fix1_manifest(), shuffled)
            assert serialize(rebuilt) == serialize(fix1)


class TestValidate:
    def test_fix1_is_clean(self, fix1):
        assert validate(fix1) == []

    def test_planted_interval_mismatch(self, fix1):
        edge = EventEdge("event_1", "object_1", TimeInterval(0, 999), "off by a lot")
        g = EggGraph(
            fix1.spatial_nodes,
            fix1.event_nodes,
            fix1.spatial_edges,
            fix1.event_edges + (edge,),
        )
        mismatches = [f for f in validate(g) if f.rule == "interval-mismatch"]
        assert len(mismatches) == 1
        assert mismatches[0].subject == "event_1->object_1"

    def test_planted_double_containment(self, fix1):
        edge = SpatialEdge("room_2", "object_2", TimeInterval(500, 700))
        g = EggGraph(
            fix1.spatial_nodes,
            fix1.event_nodes,
            fix1.spatial_edges + (edge,),
            fix1.event_edges,
        )
        overlaps = [f for f in validate(g) if f.rule == "containment-overlap"]
        assert len(overlaps) == 1
        assert overlaps[0].subject == "object_2"

    def test_planted_dangling_edges(self, fix1):
        g = EggGraph(
            fix1.spatial_nodes,
            fix1.event_nodes,
            fix1.spatial_edges + (SpatialEdge("room_9", "object_1", TimeInterval(0, 1)),),
            fix1.event_edges + (EventEdge("event_9", "object_1", TimeInterval(0, 1), "x"),),
        )
        rules = {f.rule for f in validate(g)}
        assert "dangling-spatial-edge" in rules
        assert "dangling-event-edge" in rules

    def test_event_edge_to_room_flagged(self, fix1):
        edge = EventEdge("event_1", "room_1", TimeInterval(100, 200), "not allowed")
        g = EggGraph(
            fix1.spatial_nodes, fix1.event_nodes, fix1.spatial_edges, fix1.event_edges + (edge,)
        )
        assert any(f.rule == "event-edge-layer" for f in validate(g))

    def test_random_graphs_have_no_errors(self):
        from eggraph import validation_errors

        for seed in range(40):
            assert validation_errors(random_graph(seed)) == []


class TestQueries:
    def test_events_in(self, fix1):
        assert events_in(fix1, TimeInterval(0, 250)) == {"event_1"}
        assert events_in(fix1, TimeInterval(0, 50)) == frozenset()
        assert events_in(fix1, TimeInterval(0, 1000)) == {"event_1", "event_2", "event_3"}

    def test_containing_room(self, fix1):
        assert containing_room(fix1, "object_1", 100) == "room_1"
        assert containing_room(fix1, "object_1", 500) == "room_2"
        assert containing_room(fix1, "object_3", 2000) is None

    def test_containing_room_unknown_object(self, fix1):
        with pytest.raises(UnknownSpatialIdError):
            containing_room(fix1, "object_99", 100)
        with pytest.raises(UnknownSpatialIdError):
            containing_room(fix1, "room_1", 100)

    def test_horizon(self, fix1):
        assert fix1.horizon() == TimeInterval(0, 1000)
        assert EggGraph.empty().horizon() == TimeInterval(0, 0)
