"""Command-line workflows, exercised in-process through main()."""

import json

import pytest

from eggraph import parse
from eggraph.cli import main
from eggraph.fixtures import fixture_path


@pytest.fixture()
def golden_graph(tmp_path):
    """A graph file built from the shipped manifest and records."""
    out = tmp_path / "graph.egg.json"
    code = main(
        [
            "build",
            "--manifest",
            str(fixture_path("scene.manifest.json")),
            "--records",
            str(fixture_path("events.records.jsonl")),
            "--out",
            str(out),
        ]
    )
    assert code == 0
    return out


class TestBuild:
    def test_build_matches_shipped_golden_bytes(self, golden_graph):
        golden = fixture_path("graph.egg.json").read_bytes()
        assert golden_graph.read_bytes() == golden

    def test_build_missing_file_exits_one(self, tmp_path, capsys):
        code = main(
            [
                "build",
                "--manifest",
                str(tmp_path / "nope.json"),
                "--records",
                str(tmp_path / "nope.jsonl"),
                "--out",
                str(tmp_path / "g.json"),
            ]
        )
        assert code == 1


class TestValidate:
    def test_clean_graph_exits_zero(self, golden_graph, capsys):
        assert main(["validate", str(golden_graph)]) == 0
        err = capsys.readouterr().err
        assert "spatial_nodes=6" in err

    def test_defective_graph_exits_one(self, golden_graph, tmp_path, capsys):
        data = json.loads(golden_graph.read_text())
        data["event_edges"][0]["spatial"] = "object_99"
        broken = tmp_path / "broken.json"
        broken.write_text(json.dumps(data))
        assert main(["validate", str(broken)]) == 1


class TestInspect:
    def test_summary_lines(self, golden_graph, capsys):
        assert main(["inspect", str(golden_graph)]) == 0
        out = capsys.readouterr().out
        assert "rooms: 2" in out
        assert "coffee room" in out
        assert "events: 3" in out


class TestPrune:
    def test_documented_flags_produce_documented_subgraph(
        self, golden_graph, tmp_path, capsys
    ):
        out = tmp_path / "sub.json"
        code = main(
            [
                "prune",
                str(golden_graph),
                "--time",
                "0:1000",
                "--locations",
                "room_1",
                "--objects",
                "object_1,object_2",
                "--events",
                "event_1",
                "--out",
                str(out),
            ]
        )
        assert code == 0
        printed = capsys.readouterr().out
        assert "compression: 0.3001" in printed
        sub = parse(out.read_text())
        assert set(sub.event_nodes) == {"event_1", "event_2"}
        assert set(sub.spatial_nodes) == {"object_1", "object_4", "room_1", "room_2"}

    def test_iq_file_equivalent_to_flags(self, golden_graph, tmp_path):
        iq = tmp_path / "iq.json"
        iq.write_text(
            json.dumps(
                {
                    "time": {"start": 0, "end": 1000},
                    "locations": ["room_1"],
                    "objects": ["object_1", "object_2"],
                    "events": ["event_1"],
                }
            )
        )
        via_iq = tmp_path / "via_iq.json"
        assert main(["prune", str(golden_graph), "--iq", str(iq), "--out", str(via_iq)]) == 0
        via_flags = tmp_path / "via_flags.json"
        assert (
            main(
                [
                    "prune",
                    str(golden_graph),
                    "--time",
                    "0:1000",
                    "--locations",
                    "room_1",
                    "--objects",
                    "object_1,object_2",
                    "--events",
                    "event_1",
                    "--out",
                    str(via_flags),
                ]
            )
            == 0
        )
        assert via_iq.read_bytes() == via_flags.read_bytes()

    def test_unknown_id_exits_one(self, golden_graph, tmp_path, capsys):
        code = main(
            [
                "prune",
                str(golden_graph),
                "--objects",
                "object_99",
                "--out",
                str(tmp_path / "x.json"),
            ]
        )
        assert code == 1


class TestQuery:
    def test_scripted_coffee_location(self, golden_graph, capsys):
        code = main(
            ["query", str(golden_graph), "Where can I get some coffee?", "--agent", "scripted"]
        )
        assert code == 0
        assert capsys.readouterr().out.strip() == "room_1"

    def test_no_prune_flag(self, golden_graph, capsys):
        code = main(
            [
                "query",
                str(golden_graph),
                "Was the red ceramic mug ever used to make coffee?",
                "--no-prune",
            ]
        )
        assert code == 0
        assert capsys.readouterr().out.strip() == "true"

    def test_remote_without_endpoint_exits_three(self, golden_graph, monkeypatch):
        monkeypatch.delenv("EGG_ENDPOINT", raising=False)
        code = main(
            ["query", str(golden_graph), "Where can I get some coffee?", "--agent", "remote"]
        )
        assert code == 3


class TestGenAndEval:
    def test_gen_build_eval_round_trip(self, tmp_path, capsys):
        scene = tmp_path / "scene"
        assert (
            main(
                [
                    "gen",
                    "--seed",
                    "7",
                    "--objects",
                    "8",
                    "--events",
                    "10",
                    "--questions",
                    "16",
                    "--out-dir",
                    str(scene),
                ]
            )
            == 0
        )
        graph = tmp_path / "graph.json"
        assert (
            main(
                [
                    "build",
                    "--manifest",
                    str(scene / "scene.manifest.json"),
                    "--records",
                    str(scene / "events.records.jsonl"),
                    "--out",
                    str(graph),
                ]
            )
            == 0
        )
        report = tmp_path / "report.json"
        code = main(
            [
                "eval",
                "--graph",
                str(graph),
                "--dataset",
                str(scene / "dataset.qa.json"),
                "--out",
                str(report),
            ]
        )
        assert code == 0
        payload = json.loads(report.read_text())
        assert payload["aggregates"]["queries"] == 16
        table = capsys.readouterr().out
        assert "S_all" in table

    def test_eval_runs_are_byte_identical(self, golden_graph, tmp_path):
        reports = []
        for name in ("a.json", "b.json"):
            out = tmp_path / name
            code = main(
                [
                    "eval",
                    "--graph",
                    str(golden_graph),
                    "--dataset",
                    str(fixture_path("dataset.qa.json")),
                    "--trials",
                    "2",
                    "--out",
                    str(out),
                ]
            )
            assert code == 0
            reports.append(out.read_bytes())
        assert reports[0] == reports[1]

    def test_min_score_threshold(self, golden_graph, tmp_path):
        code = main(
            [
                "eval",
                "--graph",
                str(golden_graph),
                "--dataset",
                str(fixture_path("dataset.qa.json")),
                "--ablate",
                "spatial_only",
                "--no-prune",
                "--min-score",
                "0.99",
            ]
        )
        assert code == 1


class TestUsage:
    def test_missing_subcommand_is_usage_error(self):
        with pytest.raises(SystemExit) as excinfo:
            main([])
        assert excinfo.value.code == 2

    def test_unknown_flag_is_usage_error(self):
        with pytest.raises(SystemExit) as excinfo:
            main(["validate", "--bogus"])
        assert excinfo.value.code == 2


class TestRemoteReplayThroughCli:
    def test_eval_with_recorded_fixtures(self, golden_graph, tmp_path):
        """Record remote interactions in-process, then drive them via flags."""
        from eggraph.agents import (
            AgentConfig,
            RecordingTransport,
            RemoteAnswerGenerator,
            RemoteJudge,
            RemoteRelevanceExtractor,
            load_dataset,
        )
        from eggraph.evalharness import AgentBundle, EvalConfig, run_eval

        from .remote_stubs import CannedModel

        fixtures = tmp_path / "replay"
        config = AgentConfig(endpoint="https://example.test/chat", model="canned-1")
        transport = RecordingTransport(CannedModel(), fixtures)
        bundle = AgentBundle(
            RemoteRelevanceExtractor(config, transport),
            RemoteAnswerGenerator(config, transport),
            RemoteJudge(config, transport),
        )
        graph = parse(golden_graph.read_text(encoding="utf-8"))
        dataset = load_dataset(fixture_path("dataset.qa.json"))
        run_eval(dataset, graph, bundle, EvalConfig())

        out = tmp_path / "report.json"
        code = main(
            [
                "eval",
                "--graph", str(golden_graph),
                "--dataset", str(fixture_path("dataset.qa.json")),
                "--agent", "remote",
                "--model", "canned-1",
                "--endpoint", "https://example.test/chat",
                "--replay", str(fixtures),
                "--out", str(out),
            ]
        )
        assert code == 0
        payload = json.loads(out.read_text())
        assert payload["aggregates"]["queries"] == 6
        assert payload["aggregates"]["failures"] == 0


class TestDegenerateScenes:
    def test_empty_scene_workflow(self, tmp_path):
        scene = tmp_path / "empty"
        assert (
            main(
                [
                    "gen",
                    "--objects", "0",
                    "--events", "0",
                    "--questions", "0",
                    "--out-dir", str(scene),
                ]
            )
            == 0
        )
        graph = tmp_path / "graph.json"
        assert (
            main(
                [
                    "build",
                    "--manifest", str(scene / "scene.manifest.json"),
                    "--records", str(scene / "events.records.jsonl"),
                    "--out", str(graph),
                ]
            )
            == 0
        )
        assert main(["validate", str(graph)]) == 0
        code = main(
            [
                "eval",
                "--graph", str(graph),
                "--dataset", str(scene / "dataset.qa.json"),
            ]
        )
        assert code == 0
