"""Command-line entry point.

Subcommands cover the whole workflow: ``gen`` fabricates a scene, ``build``
ingests manifest and records into a canonical graph file, ``validate`` and
``inspect`` examine it, ``prune`` extracts a query-relevant subgraph from
explicit relevance flags, ``query`` answers one question through the agents,
and ``eval`` runs a dataset and writes a report.

Exit codes: 0 success, 1 validation or evaluation failure, 2 usage error,
3 transport or agent failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .agents import (
    AgentConfig,
    Modality,
    QueryRecord,
    ScriptedAnswerGenerator,
    ScriptedJudge,
    ScriptedRelevanceExtractor,
    build_transport,
    load_dataset,
    payload_repr,
    query_to_payload,
)
from .agents.remote import (
    RemoteAnswerGenerator,
    RemoteJudge,
    RemoteRelevanceExtractor,
)
from .core import TimeInterval, validate as validate_graph
from .errors import (
    EggError,
    ExtractionFailedError,
    GenerationFailedError,
    JudgeFailedError,
    TransportError,
)
from .evalharness import AblationMode, AgentBundle, EvalConfig, run_eval
from .pruning import (
    LocationRule,
    PruneConfig,
    RelevantInfo,
    TimeRule,
    compression_ratio,
    prune_pipeline,
)
from .serialization import (
    count_tokens,
    ingest,
    iso_utc,
    load_manifest,
    load_records,
    manifest_to_payload,
    parse,
    record_to_payload,
    serialize,
)
from .synthgen import GenParams, generate

_LOCATION_RULES = {
    "literal": LocationRule.LITERAL,
    "closure": LocationRule.DESCENDANT_CLOSURE,
}
_TIME_RULES = {"literal": TimeRule.LITERAL, "ancestors": TimeRule.KEEP_ANCESTORS}


def _prune_config(args) -> PruneConfig:
    return PruneConfig(
        location_event_rule=_LOCATION_RULES[args.location_rule],
        time_hierarchy_rule=_TIME_RULES[args.time_rule],
    )


def _add_rule_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--location-rule",
        choices=sorted(_LOCATION_RULES),
        default="closure",
        help="event retention during location pruning",
    )
    parser.add_argument(
        "--time-rule",
        choices=sorted(_TIME_RULES),
        default="ancestors",
        help="hierarchy retention during time pruning",
    )


def _add_agent_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--agent", choices=("scripted", "remote"), default="scripted"
    )
    parser.add_argument("--endpoint", default="", help="chat endpoint (or EGG_ENDPOINT)")
    parser.add_argument("--model", default="", help="remote model name")
    parser.add_argument("--replay", metavar="DIR", help="replay remote calls from fixtures")
    parser.add_argument("--record", metavar="DIR", help="record remote calls to fixtures")


def _load_graph(path: str):
    return parse(Path(path).read_text(encoding="utf-8"))


def _agents(args, prune_config: PruneConfig) -> AgentBundle:
    if args.agent == "scripted":
        return AgentBundle(
            ScriptedRelevanceExtractor(prune_config),
            ScriptedAnswerGenerator(),
            ScriptedJudge(),
        )
    config = AgentConfig(endpoint=args.endpoint, model=args.model)
    transport = build_transport(config, replay_dir=args.replay, record_dir=args.record)
    return AgentBundle(
        RemoteRelevanceExtractor(config, transport, prune_config),
        RemoteAnswerGenerator(config, transport),
        RemoteJudge(config, transport),
    )


def _parse_interval(text: str) -> TimeInterval:
    try:
        start, _, end = text.partition(":")
        return TimeInterval(int(start), int(end))
    except (ValueError, EggError) as exc:
        raise EggError(f"bad interval {text!r}, expected START:END in micros") from exc


def _id_set(text: str | None) -> frozenset[str]:
    if not text:
        return frozenset()
    return frozenset(part.strip() for part in text.split(",") if part.strip())


def _infer_modality(question: str) -> Modality:
    head = question.strip().lower().split(" ", 1)[0]
    if head in ("was", "were", "is", "are", "did", "does", "do", "has", "have", "can"):
        return Modality.BINARY
    if head in ("when",):
        return Modality.TIME
    if head in ("where", "which", "who"):
        return Modality.NODE
    return Modality.TEXT


# --- subcommand implementations ----------------------------------------------


def _cmd_build(args) -> int:
    graph = ingest(load_manifest(args.manifest), load_records(args.records))
    findings = validate_graph(graph)
    for finding in findings:
        print(str(finding), file=sys.stderr)
    text = serialize(graph)
    Path(args.out).write_text(text, encoding="utf-8")
    print(f"wrote {args.out} ({count_tokens(text)} tokens)")
    return 0


def _cmd_validate(args) -> int:
    graph = _load_graph(args.graph)
    findings = validate_graph(graph)
    for finding in findings:
        print(str(finding))
    print(
        f"spatial_nodes={len(graph.spatial_nodes)} event_nodes={len(graph.event_nodes)} "
        f"spatial_edges={len(graph.spatial_edges)} event_edges={len(graph.event_edges)}",
        file=sys.stderr,
    )
    errors = [f for f in findings if f.severity == "error"]
    if errors or (args.strict and findings):
        return 1
    return 0


def _cmd_inspect(args) -> int:
    graph = _load_graph(args.graph)
    horizon = graph.horizon()
    rooms = list(graph.rooms())
    print(f"rooms: {len(rooms)}")
    for room in rooms:
        print(f"  {room.id}: {room.name}")
    print(f"objects: {len(list(graph.objects()))}")
    print(f"events: {len(graph.event_nodes)}")
    print(f"spatial edges: {len(graph.spatial_edges)}")
    print(f"event edges: {len(graph.event_edges)}")
    print(
        f"horizon: {iso_utc(horizon.start)} .. {iso_utc(horizon.end)} "
        f"(micros {horizon.start} .. {horizon.end})"
    )
    return 0


def _relevance_from_args(args) -> RelevantInfo:
    if args.iq:
        data = json.loads(Path(args.iq).read_text(encoding="utf-8"))
        time = None
        if data.get("time") is not None:
            time = TimeInterval(int(data["time"]["start"]), int(data["time"]["end"]))
        return RelevantInfo(
            time=time,
            locations=frozenset(data.get("locations", [])),
            spatial=frozenset(data.get("objects", [])),
            events=frozenset(data.get("events", [])),
        )
    return RelevantInfo(
        time=_parse_interval(args.time) if args.time else None,
        locations=_id_set(args.locations),
        spatial=_id_set(args.objects),
        events=_id_set(args.events),
    )


def _cmd_prune(args) -> int:
    graph = _load_graph(args.graph)
    info = _relevance_from_args(args)
    sub = prune_pipeline(graph, info, _prune_config(args))
    text = serialize(sub.materialize(), omit_event_edges=args.omit_edges)
    Path(args.out).write_text(text, encoding="utf-8")
    ratio = compression_ratio(graph, sub)
    print(f"wrote {args.out}")
    print(f"compression: {ratio:.4f}")
    return 0


def _cmd_query(args) -> int:
    graph = _load_graph(args.graph)
    modality = Modality(args.modality) if args.modality else _infer_modality(args.question)
    # Gold is unused for one-off queries; any modality-conformant value works.
    gold = {
        Modality.TEXT: "",
        Modality.BINARY: False,
        Modality.NODE: frozenset(),
        Modality.TIME: 0,
    }[modality]
    query = QueryRecord(id="cli", question=args.question, modality=modality, gold=gold)
    prune_config = _prune_config(args)
    agents = _agents(args, prune_config)
    if args.no_prune:
        context_graph = graph
        context = serialize(graph)
    else:
        try:
            info = agents.extractor.extract_relevant_info(query, graph)
        except ExtractionFailedError as exc:
            print(f"extraction failed, answering over the full graph: {exc}", file=sys.stderr)
            info = None
        if info is None:
            context = serialize(graph)
        else:
            sub = prune_pipeline(graph, info, prune_config)
            context = serialize(sub.materialize())
            print(f"compression: {compression_ratio(graph, sub):.4f}", file=sys.stderr)
    answer = agents.generator.generate_answer(query, context)
    print(payload_repr(answer.payload))
    if answer.rationale:
        print(f"rationale: {answer.rationale}", file=sys.stderr)
    return 0


def _cmd_eval(args) -> int:
    graph = _load_graph(args.graph)
    dataset = load_dataset(args.dataset)
    prune_config = _prune_config(args)
    agents = _agents(args, prune_config)
    cfg = EvalConfig(
        pruning=not args.no_prune,
        prune_config=prune_config,
        ablation=AblationMode(args.ablate),
        trials=args.trials,
        concurrency=args.concurrency,
        seed=args.seed,
        caption_source=args.caption_source,
    )
    report = run_eval(dataset, graph, agents, cfg)
    if args.out:
        Path(args.out).write_text(report.to_json(), encoding="utf-8")
        print(f"wrote {args.out}", file=sys.stderr)
    print(report.render_table())
    if args.min_score is not None:
        score = report.aggregates.score_all or 0.0
        if score < args.min_score:
            print(
                f"overall score {score:.4f} below threshold {args.min_score}",
                file=sys.stderr,
            )
            return 1
    return 0


def _cmd_gen(args) -> int:
    params = GenParams(
        seed=args.seed,
        n_rooms=args.rooms,
        n_objects=args.objects,
        n_events=args.events,
        n_questions=args.questions,
        caption_word_dropout=args.dropout,
    )
    manifest, records, questions = generate(params)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "scene.manifest.json").write_text(
        json.dumps(manifest_to_payload(manifest), indent=2, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )
    lines = "".join(
        json.dumps(record_to_payload(record), ensure_ascii=False) + "\n"
        for record in records
    )
    (out_dir / "events.records.jsonl").write_text(lines, encoding="utf-8")
    (out_dir / "dataset.qa.json").write_text(
        json.dumps(
            {"questions": [query_to_payload(q) for q in questions]},
            indent=2,
            ensure_ascii=False,
        )
        + "\n",
        encoding="utf-8",
    )
    print(
        f"wrote {out_dir}/scene.manifest.json, events.records.jsonl, dataset.qa.json "
        f"({len(records)} events, {len(questions)} questions)"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="egg",
        description="Build, prune, serialize, and query event-grounded scene graphs.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="ingest manifest + records into a graph file")
    p.add_argument("--manifest", required=True)
    p.add_argument("--records", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_build)

    p = sub.add_parser("validate", help="check graph invariants")
    p.add_argument("graph")
    p.add_argument("--strict", action="store_true", help="fail on warnings too")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("inspect", help="summarize a graph file")
    p.add_argument("graph")
    p.set_defaults(func=_cmd_inspect)

    p = sub.add_parser("prune", help="extract a query-relevant subgraph")
    p.add_argument("graph")
    p.add_argument("--time", help="relevant window START:END in micros")
    p.add_argument("--locations", help="comma-separated room ids")
    p.add_argument("--objects", help="comma-separated object ids")
    p.add_argument("--events", help="comma-separated event ids")
    p.add_argument("--iq", help="JSON file with time/locations/objects/events")
    p.add_argument("--omit-edges", action="store_true", help="serialize without grounding links")
    p.add_argument("--out", required=True)
    _add_rule_flags(p)
    p.set_defaults(func=_cmd_prune)

    p = sub.add_parser("query", help="answer one question over a graph")
    p.add_argument("graph")
    p.add_argument("question")
    p.add_argument("--modality", choices=[m.value for m in Modality])
    p.add_argument("--no-prune", action="store_true")
    _add_agent_flags(p)
    _add_rule_flags(p)
    p.set_defaults(func=_cmd_query)

    p = sub.add_parser("eval", help="run a QA dataset and report metrics")
    p.add_argument("--graph", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--no-prune", action="store_true")
    p.add_argument(
        "--ablate",
        choices=[m.value for m in AblationMode],
        default=AblationMode.FULL.value,
    )
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--concurrency", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--caption-source", default="ground_truth")
    p.add_argument("--min-score", type=float)
    p.add_argument("--out", help="write report JSON here")
    _add_agent_flags(p)
    _add_rule_flags(p)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("gen", help="generate a synthetic scene and dataset")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--rooms", type=int, default=2)
    p.add_argument("--objects", type=int, default=21)
    p.add_argument("--events", type=int, default=35)
    p.add_argument("--questions", type=int, default=80)
    p.add_argument("--dropout", type=float, default=0.0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_gen)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (TransportError, ExtractionFailedError, GenerationFailedError, JudgeFailedError) as exc:
        print(f"agent error: {exc}", file=sys.stderr)
        return 3
    except EggError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
