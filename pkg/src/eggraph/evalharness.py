"""Question-answering evaluation: run a dataset through extraction, pruning,
generation, and judging, then aggregate the scores.

Per-query failures are recorded as score 0 with an error note; the harness
never aborts a run. Reports are deterministic: rows are ordered by trial and
query id, aggregates are pure functions of the rows, and nothing wall-clock
dependent is recorded.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum

from .agents.base import (
    AnswerGenerator,
    AnswerJudge,
    Modality,
    QueryRecord,
    RelevanceExtractor,
    payload_repr,
    render_answer_prompt,
)
from .core import EggGraph, id_sort_key
from .errors import EggError, ExtractionFailedError
from .pruning import PruneConfig, prune_pipeline
from .serialization import count_tokens, serialize

logger = logging.getLogger(__name__)


class AblationMode(str, Enum):
    """Which representation variant to evaluate."""

    FULL = "full"
    SPATIAL_ONLY = "spatial_only"
    EVENT_ONLY = "event_only"
    NO_EDGES = "no_edges"
    PASSED_NO_EDGES = "passed_no_edges"


@dataclass(frozen=True)
class AblationResult:
    """An ablated graph plus the serialization flag it implies."""

    graph: EggGraph
    omit_event_edges: bool = False


def ablate(g: EggGraph, mode: AblationMode) -> AblationResult:
    """Strip a component family from the graph (or only from its rendering).

    ``spatial_only`` drops events and their edges; ``event_only`` drops all
    spatial content (grounding edges would dangle, so they go too);
    ``no_edges`` keeps both node families but severs the grounding links;
    ``passed_no_edges`` keeps the graph intact and only omits grounding links
    when serializing.
    """
    if mode is AblationMode.FULL:
        return AblationResult(g)
    if mode is AblationMode.SPATIAL_ONLY:
        return AblationResult(replace(g, event_nodes={}, event_edges=()))
    if mode is AblationMode.EVENT_ONLY:
        return AblationResult(
            replace(g, spatial_nodes={}, spatial_edges=(), event_edges=())
        )
    if mode is AblationMode.NO_EDGES:
        return AblationResult(replace(g, event_edges=()))
    return AblationResult(g, omit_event_edges=True)


@dataclass(frozen=True)
class AgentBundle:
    extractor: RelevanceExtractor
    generator: AnswerGenerator
    judge: AnswerJudge


@dataclass(frozen=True)
class EvalConfig:
    """Harness settings, echoed verbatim into the report."""

    pruning: bool = True
    prune_config: PruneConfig = field(default_factory=PruneConfig)
    ablation: AblationMode = AblationMode.FULL
    trials: int = 1
    concurrency: int = 1
    seed: int = 0
    caption_source: str = "ground_truth"


@dataclass(frozen=True)
class EvalRow:
    query_id: str
    trial: int
    modality: Modality
    score: float
    exact: bool | None
    jaccard: float | None
    tokens_used: int
    compression: float
    predicted: str
    error: str | None = None


@dataclass(frozen=True)
class Aggregates:
    """Dataset-level metrics; ``None`` marks an undefined aggregate."""

    score_all: float | None
    score_text: float | None
    score_time: float | None
    accuracy_binary: float | None
    accuracy_node: float | None
    accuracy_node_exact: float | None
    mean_tokens: float | None
    mean_compression: float | None
    queries: int
    failures: int


def jaccard(gold: frozenset, predicted: frozenset) -> float:
    """Set overlap in [0, 1]; two empty sets count as a perfect match."""
    if not gold and not predicted:
        return 1.0
    union = gold | predicted
    return len(gold & predicted) / len(union)


def _mean(values: list[float]) -> float | None:
    return sum(values) / len(values) if values else None


def compute_aggregates(rows: tuple[EvalRow, ...]) -> Aggregates:
    """Recompute every aggregate from the rows (uniform per-query means)."""
    return Aggregates(
        score_all=_mean([r.score for r in rows]),
        score_text=_mean([r.score for r in rows if r.modality is Modality.TEXT]),
        score_time=_mean([r.score for r in rows if r.modality is Modality.TIME]),
        accuracy_binary=_mean(
            [1.0 if r.exact else 0.0 for r in rows if r.modality is Modality.BINARY]
        ),
        accuracy_node=_mean([r.jaccard for r in rows if r.modality is Modality.NODE]),
        accuracy_node_exact=_mean(
            [1.0 if r.exact else 0.0 for r in rows if r.modality is Modality.NODE]
        ),
        mean_tokens=_mean([float(r.tokens_used) for r in rows]),
        mean_compression=_mean([r.compression for r in rows]),
        queries=len(rows),
        failures=sum(1 for r in rows if r.error is not None),
    )


@dataclass(frozen=True)
class EvalReport:
    rows: tuple[EvalRow, ...]
    aggregates: Aggregates
    config: EvalConfig

    def to_payload(self) -> dict:
        return {
            "config": {
                "pruning": self.config.pruning,
                "location_rule": self.config.prune_config.location_event_rule.value,
                "time_rule": self.config.prune_config.time_hierarchy_rule.value,
                "ablation": self.config.ablation.value,
                "trials": self.config.trials,
                "seed": self.config.seed,
                "caption_source": self.config.caption_source,
            },
            "aggregates": {
                "score_all": self.aggregates.score_all,
                "score_text": self.aggregates.score_text,
                "score_time": self.aggregates.score_time,
                "accuracy_binary": self.aggregates.accuracy_binary,
                "accuracy_node": self.aggregates.accuracy_node,
                "accuracy_node_exact": self.aggregates.accuracy_node_exact,
                "mean_tokens": self.aggregates.mean_tokens,
                "mean_compression": self.aggregates.mean_compression,
                "queries": self.aggregates.queries,
                "failures": self.aggregates.failures,
            },
            "rows": [
                {
                    "id": row.query_id,
                    "trial": row.trial,
                    "modality": row.modality.value,
                    "score": row.score,
                    "exact": row.exact,
                    "jaccard": row.jaccard,
                    "tokens_used": row.tokens_used,
                    "compression": row.compression,
                    "predicted": row.predicted,
                    "error": row.error,
                }
                for row in self.rows
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_payload(), indent=2, ensure_ascii=False) + "\n"

    def render_table(self) -> str:
        """One-line metric summary table mirroring the report aggregates."""
        a = self.aggregates
        headers = [
            "Pruning",
            "Ablation",
            "S_all",
            "S_text",
            "A_binary",
            "A_node",
            "S_time",
            "Tokens",
            "Compression",
        ]

        def fmt(value, pct=False):
            if value is None:
                return "-"
            if pct:
                return f"{100 * value:.2f}%"
            return f"{value:.3f}"

        row = [
            "on" if self.config.pruning else "off",
            self.config.ablation.value,
            fmt(a.score_all),
            fmt(a.score_text),
            fmt(a.accuracy_binary),
            fmt(a.accuracy_node),
            fmt(a.score_time),
            "-" if a.mean_tokens is None else f"{a.mean_tokens:.0f}",
            fmt(a.mean_compression, pct=True),
        ]
        widths = [max(len(h), len(v)) for h, v in zip(headers, row)]
        line = lambda cells: "  ".join(c.ljust(w) for c, w in zip(cells, widths))
        return "\n".join([line(headers), line(["-" * w for w in widths]), line(row)])


def _score_row(
    query: QueryRecord,
    trial: int,
    graph: EggGraph,
    full_context: str,
    full_tokens: int,
    agents: AgentBundle,
    cfg: EvalConfig,
    omit_edges: bool,
) -> EvalRow:
    try:
        if cfg.pruning:
            try:
                info = agents.extractor.extract_relevant_info(query, graph)
            except ExtractionFailedError as exc:
                # Degrade to the unpruned graph; the run stays comparable.
                logger.warning("%s: extraction failed (%s), using full graph", query.id, exc)
                info = None
            if info is None:
                context, compression = full_context, 0.0
            else:
                sub = prune_pipeline(graph, info, cfg.prune_config)
                context = serialize(sub, omit_event_edges=omit_edges)
                compression = (
                    1.0 - count_tokens(serialize(sub)) / full_tokens if full_tokens else 0.0
                )
                compression = min(1.0, max(0.0, compression))
        else:
            context = full_context
            compression = 0.0
        prompt = render_answer_prompt(query.question, context, query.modality)
        tokens_used = count_tokens(prompt)
        answer = agents.generator.generate_answer(query, context)
        score = agents.judge.judge_answer(query, query.gold, answer)
        exact = None
        jac = None
        if query.modality is Modality.BINARY:
            exact = answer.payload == query.gold
        elif query.modality is Modality.NODE:
            predicted = answer.payload if isinstance(answer.payload, frozenset) else frozenset()
            exact = predicted == query.gold
            jac = jaccard(query.gold, predicted)
        return EvalRow(
            query_id=query.id,
            trial=trial,
            modality=query.modality,
            score=score,
            exact=exact,
            jaccard=jac,
            tokens_used=tokens_used,
            compression=compression,
            predicted=payload_repr(answer.payload),
        )
    except EggError as exc:
        return EvalRow(
            query_id=query.id,
            trial=trial,
            modality=query.modality,
            score=0.0,
            exact=False if query.modality in (Modality.BINARY, Modality.NODE) else None,
            jaccard=0.0 if query.modality is Modality.NODE else None,
            tokens_used=0,
            compression=0.0,
            predicted="(failed)",
            error=f"{type(exc).__name__}: {exc}",
        )


def run_eval(
    dataset: list[QueryRecord],
    g: EggGraph,
    agents: AgentBundle,
    cfg: EvalConfig = EvalConfig(),
) -> EvalReport:
    """Evaluate every query against the (possibly ablated) graph.

    Queries run concurrently up to ``cfg.concurrency``; rows are assembled in
    deterministic (trial, query id) order regardless.
    """
    ablation = ablate(g, cfg.ablation)
    graph = ablation.graph
    omit_edges = ablation.omit_event_edges
    full_context = serialize(graph, omit_event_edges=omit_edges)
    full_tokens = count_tokens(serialize(graph))

    jobs = [
        (trial, query) for trial in range(1, cfg.trials + 1) for query in dataset
    ]

    def work(job):
        trial, query = job
        return _score_row(
            query, trial, graph, full_context, full_tokens, agents, cfg, omit_edges
        )

    if cfg.concurrency > 1:
        with ThreadPoolExecutor(max_workers=cfg.concurrency) as pool:
            rows = list(pool.map(work, jobs))
    else:
        rows = [work(job) for job in jobs]

    rows.sort(key=lambda r: (r.trial, id_sort_key(r.query_id), r.query_id))
    rows_tuple = tuple(rows)
    return EvalReport(
        rows=rows_tuple, aggregates=compute_aggregates(rows_tuple), config=cfg
    )
