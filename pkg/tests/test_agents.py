"""Scripted and remote agents: extraction, generation, judging, replay."""

import json
import logging

import pytest

from eggraph import EggGraph, TimeInterval, serialize
from eggraph.agents import (
    AgentConfig,
    Answer,
    Modality,
    QueryRecord,
    RecordingTransport,
    RemoteAnswerGenerator,
    RemoteJudge,
    RemoteRelevanceExtractor,
    ReplayTransport,
    ScriptedAnswerGenerator,
    ScriptedJudge,
    ScriptedRelevanceExtractor,
    payload_from_json,
    payload_to_json,
    request_key,
    resolve_event_refs,
    resolve_spatial_names,
    token_f1,
)
from eggraph.errors import (
    ExtractionFailedError,
    ModalityViolationError,
    ReplayMissError,
    TransportError,
)


def _query(question, modality=Modality.TEXT, gold="x"):
    golds = {
        Modality.TEXT: "x",
        Modality.BINARY: True,
        Modality.NODE: frozenset({"room_1"}),
        Modality.TIME: 0,
    }
    return QueryRecord(id="t", question=question, modality=modality, gold=golds[modality])


class TestScriptedExtractor:
    def test_coffee_mug_question(self, fix1):
        extractor = ScriptedRelevanceExtractor()
        info = extractor.extract_relevant_info(
            _query("Which mug was used for making coffee?", Modality.NODE), fix1
        )
        assert info.time == TimeInterval(0, 1000)
        assert info.locations == {"room_1", "room_2"}
        assert info.spatial == {"object_1", "object_2"}
        assert info.events == {"event_1"}

    def test_unknown_entity_abstains(self, fix1):
        extractor = ScriptedRelevanceExtractor()
        info = extractor.extract_relevant_info(
            _query("What color is the unicorn?"), fix1
        )
        assert info.time == TimeInterval(0, 1000)
        assert info.locations == {"room_1", "room_2"}
        assert info.spatial == frozenset()
        assert info.events == frozenset()

    def test_explicit_window_is_parsed(self, fix1):
        extractor = ScriptedRelevanceExtractor()
        info = extractor.extract_relevant_info(
            _query("What happened between 200 and 700 in the scene?"), fix1
        )
        assert info.time == TimeInterval(200, 700)

    def test_room_mention_narrows_locations(self, fix1):
        extractor = ScriptedRelevanceExtractor()
        info = extractor.extract_relevant_info(
            _query("Describe the office."), fix1
        )
        assert info.locations == {"room_2"}

    def test_where_question_adopts_event_objects(self, fix1):
        extractor = ScriptedRelevanceExtractor()
        info = extractor.extract_relevant_info(
            _query("Where can I get some coffee?", Modality.NODE), fix1
        )
        assert info.spatial == {"object_1", "object_4"}
        assert info.events == {"event_1"}


class TestScriptedGenerator:
    def test_binary_coffee_rule(self, fix1):
        generator = ScriptedAnswerGenerator()
        answer = generator.generate_answer(
            _query("Was the red ceramic mug ever used to make coffee?", Modality.BINARY),
            serialize(fix1),
        )
        assert answer.payload is True

    def test_node_coffee_location_rule(self, fix1):
        generator = ScriptedAnswerGenerator()
        answer = generator.generate_answer(
            _query("Where can I get some coffee?", Modality.NODE), serialize(fix1)
        )
        assert answer.payload == frozenset({"room_1"})

    def test_empty_context_abstains_per_modality(self):
        generator = ScriptedAnswerGenerator()
        context = serialize(EggGraph.empty())
        cases = {
            Modality.BINARY: False,
            Modality.NODE: frozenset(),
            Modality.TEXT: "insufficient information",
            Modality.TIME: None,
        }
        for modality, expected in cases.items():
            answer = generator.generate_answer(
                _query("Was the red ceramic mug ever used to make coffee?", modality)
                if modality is Modality.BINARY
                else _query("Where can I get some coffee?", modality),
                context,
            )
            assert answer.payload == expected

    def test_unrecognized_question_abstains(self, fix1):
        generator = ScriptedAnswerGenerator()
        answer = generator.generate_answer(
            _query("Hum me a tune about mugs?", Modality.TEXT), serialize(fix1)
        )
        assert answer.payload == "insufficient information"

    def test_edge_free_context_degrades_binary(self, fix1):
        generator = ScriptedAnswerGenerator()
        answer = generator.generate_answer(
            _query("Was the red ceramic mug ever used to make coffee?", Modality.BINARY),
            serialize(fix1, omit_event_edges=True),
        )
        assert answer.payload is False


class TestScriptedJudge:
    def test_identity_scores_one(self):
        judge = ScriptedJudge()
        cases = [
            (Modality.BINARY, True, True),
            (Modality.NODE, frozenset({"room_1"}), frozenset({"room_1"})),
            (Modality.TIME, TimeInterval(1, 2), TimeInterval(1, 2)),
            (Modality.TEXT, "red mug", "red mug"),
        ]
        for modality, gold, predicted in cases:
            query = QueryRecord(id="q", question="?", modality=modality, gold=gold)
            assert judge.judge_answer(query, gold, Answer(modality, predicted)) == 1.0

    def test_binary_mismatch_scores_zero(self):
        judge = ScriptedJudge()
        query = QueryRecord(id="q", question="?", modality=Modality.BINARY, gold=True)
        assert judge.judge_answer(query, True, Answer(Modality.BINARY, False)) == 0.0

    def test_text_token_f1_example(self):
        judge = ScriptedJudge()
        query = QueryRecord(
            id="q", question="?", modality=Modality.TEXT, gold="the red ceramic mug"
        )
        score = judge.judge_answer(
            query, "the red ceramic mug", Answer(Modality.TEXT, "red mug")
        )
        assert score == pytest.approx(2 / 3)

    def test_time_interval_vs_instant_mismatch(self):
        judge = ScriptedJudge()
        query = QueryRecord(
            id="q", question="?", modality=Modality.TIME, gold=TimeInterval(1, 2)
        )
        assert judge.judge_answer(query, TimeInterval(1, 2), Answer(Modality.TIME, 1)) == 0.0

    def test_token_f1_edges(self):
        assert token_f1("", "") == 1.0
        assert token_f1("a b", "") == 0.0
        assert token_f1("a b", "c d") == 0.0


class TestNameResolution:
    def test_exact_name_case_insensitive(self, fix1):
        assert resolve_spatial_names(fix1, ["Red Ceramic MUG"]) == {"object_1"}

    def test_id_passthrough(self, fix1):
        assert resolve_spatial_names(fix1, ["object_3"]) == {"object_3"}

    def test_caption_substring_fallback(self, fix1):
        assert resolve_spatial_names(fix1, ["chipped handle"]) == {"object_2"}

    def test_ambiguity_keeps_all(self, fix1):
        # "A ..." appears in every caption; ambiguity is tolerated by design.
        matches = resolve_spatial_names(fix1, ["a "])
        assert len(matches) >= 2

    def test_unmappable_dropped_with_warning(self, fix1, caplog):
        with caplog.at_level(logging.WARNING):
            assert resolve_spatial_names(fix1, ["garage"]) == frozenset()
        assert "garage" in caplog.text

    def test_event_by_summary_or_id(self, fix1):
        assert resolve_event_refs(fix1, ["PERSON MAKES COFFEE"]) == {"event_1"}
        assert resolve_event_refs(fix1, ["event_2"]) == {"event_2"}
        assert resolve_event_refs(fix1, ["nothing like this"]) == frozenset()


class TestPayloads:
    def test_round_trip_every_modality(self):
        cases = [
            (Modality.TEXT, "words"),
            (Modality.BINARY, True),
            (Modality.NODE, frozenset({"object_2", "object_10"})),
            (Modality.TIME, TimeInterval(3, 9)),
            (Modality.TIME, 1234),
        ]
        for modality, payload in cases:
            assert payload_from_json(modality, payload_to_json(payload)) == payload

    def test_type_violations_raise(self):
        with pytest.raises(ModalityViolationError):
            payload_from_json(Modality.BINARY, "yes")
        with pytest.raises(ModalityViolationError):
            payload_from_json(Modality.NODE, "room_1")
        with pytest.raises(ModalityViolationError):
            payload_from_json(Modality.TIME, {"weird": 1})

    def test_query_gold_must_fit_modality(self):
        with pytest.raises(ModalityViolationError):
            QueryRecord(id="q", question="?", modality=Modality.BINARY, gold="yes")

    def test_answer_payload_must_fit_modality(self):
        with pytest.raises(ModalityViolationError):
            Answer(Modality.NODE, "room_1")


# --- remote agents over record/replay ----------------------------------------


class StubTransport:
    """Feeds canned completion contents, recording every request body."""

    def __init__(self, contents):
        self.contents = list(contents)
        self.bodies = []

    def send(self, body):
        self.bodies.append(body)
        if not self.contents:
            raise TransportError("stub exhausted")
        return {"choices": [{"message": {"content": self.contents.pop(0)}}]}


CONFIG = AgentConfig(endpoint="https://example.test/chat", model="judge-1", max_retries=1)


class TestRemoteExtractor:
    def _stage_contents(self, rooms, objects, events):
        return [
            json.dumps({"time": None, "rooms": rooms}),
            json.dumps({"objects": objects, "events": events}),
        ]

    def test_two_stage_flow_resolves_names(self, fix1):
        stub = StubTransport(
            self._stage_contents(["coffee room"], ["red ceramic mug"], ["event_1"])
        )
        extractor = RemoteRelevanceExtractor(CONFIG, stub)
        info = extractor.extract_relevant_info(
            _query("Which mug was used for making coffee?", Modality.NODE), fix1
        )
        assert info.locations == {"room_1"}
        assert info.spatial == {"object_1"}
        assert info.events == {"event_1"}
        assert info.time == TimeInterval(0, 1000)

    def test_unmappable_room_dropped_with_warning(self, fix1, caplog):
        stub = StubTransport(self._stage_contents(["garage"], [], []))
        extractor = RemoteRelevanceExtractor(CONFIG, stub)
        with caplog.at_level(logging.WARNING):
            info = extractor.extract_relevant_info(_query("anything?"), fix1)
        assert "garage" in caplog.text
        assert info.locations == {"room_1", "room_2"}  # fallback: all rooms

    def test_unparseable_output_reprompts_once_then_fails(self, fix1):
        stub = StubTransport(["not json at all", "still not json"])
        extractor = RemoteRelevanceExtractor(CONFIG, stub)
        with pytest.raises(ExtractionFailedError):
            extractor.extract_relevant_info(_query("anything?"), fix1)
        assert len(stub.bodies) == 2  # original + one repair attempt

    def test_request_bodies_are_byte_stable(self, fix1):
        query = _query("Which mug was used for making coffee?", Modality.NODE)
        bodies = []
        for _ in range(2):
            stub = StubTransport(self._stage_contents([], [], []))
            RemoteRelevanceExtractor(CONFIG, stub).extract_relevant_info(query, fix1)
            bodies.append([request_key(b) for b in stub.bodies])
        assert bodies[0] == bodies[1]


class TestRemoteGenerator:
    def test_binary_shape(self, fix1):
        stub = StubTransport([json.dumps({"answer": True})])
        generator = RemoteAnswerGenerator(CONFIG, stub)
        answer = generator.generate_answer(
            _query("Was the mug used?", Modality.BINARY), serialize(fix1)
        )
        assert answer.payload is True

    def test_node_names_resolved_against_context(self, fix1):
        stub = StubTransport([json.dumps({"answer": ["coffee room", "object_3"]})])
        generator = RemoteAnswerGenerator(CONFIG, stub)
        answer = generator.generate_answer(
            _query("Where?", Modality.NODE), serialize(fix1)
        )
        assert answer.payload == {"room_1", "object_3"}

    def test_shape_violation_reprompts_then_raises(self, fix1):
        stub = StubTransport(
            [json.dumps({"answer": "yes"}), json.dumps({"answer": "still wrong"})]
        )
        generator = RemoteAnswerGenerator(CONFIG, stub)
        with pytest.raises(ModalityViolationError):
            generator.generate_answer(
                _query("Was the mug used?", Modality.BINARY), serialize(fix1)
            )
        assert len(stub.bodies) == 2

    def test_time_interval_shape(self, fix1):
        stub = StubTransport([json.dumps({"answer": {"start": 5, "end": 9}})])
        generator = RemoteAnswerGenerator(CONFIG, stub)
        answer = generator.generate_answer(
            _query("When?", Modality.TIME), serialize(fix1)
        )
        assert answer.payload == TimeInterval(5, 9)


class TestRemoteJudge:
    def test_score_parsed_and_clamped(self, fix1):
        stub = StubTransport([json.dumps({"score": 1.7})])
        judge = RemoteJudge(CONFIG, stub)
        query = _query("?", Modality.TEXT)
        assert judge.judge_answer(query, "x", Answer(Modality.TEXT, "y")) == 1.0


class TestRecordReplay:
    def test_recorded_fixtures_replay_identically(self, fix1, tmp_path):
        query = _query("Which mug was used for making coffee?", Modality.NODE)
        live = StubTransport(
            [
                json.dumps({"time": None, "rooms": []}),
                json.dumps({"objects": ["red ceramic mug"], "events": []}),
            ]
        )
        recorder = RecordingTransport(live, tmp_path)
        recorded = RemoteRelevanceExtractor(CONFIG, recorder).extract_relevant_info(
            query, fix1
        )

        replayer = ReplayTransport(tmp_path)
        replayed = RemoteRelevanceExtractor(CONFIG, replayer).extract_relevant_info(
            query, fix1
        )
        assert recorded == replayed
        assert len(list(tmp_path.glob("*.json"))) == 2

    def test_replay_miss_raises_immediately(self, tmp_path, fix1):
        extractor = RemoteRelevanceExtractor(CONFIG, ReplayTransport(tmp_path))
        with pytest.raises(ReplayMissError):
            extractor.extract_relevant_info(_query("anything?"), fix1)
