"""Query-relevant subgraph extraction.

Five manipulation functions reduce a graph to what a question needs:

* :func:`prune_time` keeps events inside a window plus the objects they touch
* :func:`prune_location` keeps named locations, their contained objects, and
  the events reachable from them
* :func:`prune_spatial` keeps events involving chosen objects, then the
  objects those events touch
* :func:`prune_event` keeps chosen events and the objects they touch
* :func:`expand_history` pulls an object's complete event history back in
  from the underlying full graph

Every function selects node sets first and then applies the edge-closure
rule: exactly the edges of the underlying graph whose endpoints all survive
are retained. :func:`prune_pipeline` composes them in the staged order used
for question answering.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable

from .core import (
    EggGraph,
    EventEdge,
    Layer,
    SpatialEdge,
    TimeInterval,
    id_sort_key,
)
from .errors import (
    EmptyInputSetError,
    UnknownEventIdError,
    UnknownLocationIdError,
    UnknownSpatialIdError,
)
from .serialization import count_tokens, serialize


class LocationRule(str, Enum):
    """How location pruning retains events.

    ``LITERAL`` keeps only events with an edge directly to a named location;
    since events ground objects, this usually keeps none. ``DESCENDANT_CLOSURE``
    keeps events connected to any retained spatial node, which is what makes
    the staged pipeline productive.
    """

    LITERAL = "literal"
    DESCENDANT_CLOSURE = "descendant_closure"


class TimeRule(str, Enum):
    """How time pruning treats the containment hierarchy.

    ``LITERAL`` keeps only spatial nodes with an in-window event edge, which
    drops every room. ``KEEP_ANCESTORS`` additionally retains the room
    ancestors of surviving objects (looked up in the underlying graph, so
    rooms can come back after later stages removed them) and, while location
    selection is still pending, all rooms.
    """

    LITERAL = "literal"
    KEEP_ANCESTORS = "keep_ancestors"


@dataclass(frozen=True)
class PruneConfig:
    location_event_rule: LocationRule = LocationRule.DESCENDANT_CLOSURE
    time_hierarchy_rule: TimeRule = TimeRule.KEEP_ANCESTORS


@dataclass(frozen=True)
class RelevantInfo:
    """The four facets of query relevance driving the pipeline.

    ``time=None`` means no time constraint (full horizon); an empty
    ``locations`` set means all rooms.
    """

    time: TimeInterval | None = None
    locations: frozenset[str] = frozenset()
    spatial: frozenset[str] = frozenset()
    events: frozenset[str] = frozenset()


@dataclass(frozen=True)
class Subgraph:
    """A node selection over a parent graph, closed over the parent's edges.

    Edge lists are derived from the node sets at construction, so the
    closure rule holds by construction and equal selections are equal
    subgraphs.
    """

    parent: EggGraph
    spatial_ids: frozenset[str]
    event_ids: frozenset[str]
    spatial_edges: tuple[SpatialEdge, ...] = field(init=False)
    event_edges: tuple[EventEdge, ...] = field(init=False)

    def __post_init__(self):
        unknown_spatial = self.spatial_ids - self.parent.spatial_nodes.keys()
        if unknown_spatial:
            raise UnknownSpatialIdError(f"not in parent graph: {sorted(unknown_spatial)}")
        unknown_events = self.event_ids - self.parent.event_nodes.keys()
        if unknown_events:
            raise UnknownEventIdError(f"not in parent graph: {sorted(unknown_events)}")
        spatial_edges = tuple(
            sorted(
                (
                    e
                    for e in self.parent.spatial_edges
                    if e.parent in self.spatial_ids and e.child in self.spatial_ids
                ),
                key=lambda e: (id_sort_key(e.parent), id_sort_key(e.child), e.interval),
            )
        )
        event_edges = tuple(
            sorted(
                (
                    e
                    for e in self.parent.event_edges
                    if e.event in self.event_ids and e.spatial in self.spatial_ids
                ),
                key=lambda e: (id_sort_key(e.event), id_sort_key(e.spatial)),
            )
        )
        object.__setattr__(self, "spatial_edges", spatial_edges)
        object.__setattr__(self, "event_edges", event_edges)

    @classmethod
    def full(cls, g: EggGraph) -> "Subgraph":
        return cls(g, frozenset(g.spatial_nodes), frozenset(g.event_nodes))

    @classmethod
    def empty(cls, g: EggGraph) -> "Subgraph":
        return cls(g, frozenset(), frozenset())

    def select(self, spatial_ids: Iterable[str], event_ids: Iterable[str]) -> "Subgraph":
        return Subgraph(self.parent, frozenset(spatial_ids), frozenset(event_ids))

    @property
    def is_empty(self) -> bool:
        return not self.spatial_ids and not self.event_ids

    def materialize(self) -> EggGraph:
        """A standalone graph with exactly the retained nodes and edges."""
        return EggGraph(
            spatial_nodes={
                i: self.parent.spatial_nodes[i]
                for i in sorted(self.spatial_ids, key=id_sort_key)
            },
            event_nodes={
                i: self.parent.event_nodes[i] for i in sorted(self.event_ids, key=id_sort_key)
            },
            spatial_edges=self.spatial_edges,
            event_edges=self.event_edges,
        )


def _room_ids(g: EggGraph, ids: Iterable[str]) -> frozenset[str]:
    return frozenset(
        i for i in ids if g.spatial_nodes[i].layer is Layer.ROOM
    )


def prune_time(
    g: Subgraph,
    window: TimeInterval,
    cfg: PruneConfig = PruneConfig(),
    *,
    pending_locations: bool = True,
) -> Subgraph:
    """Keep events contained in ``window`` and the objects they touch.

    Under ``KEEP_ANCESTORS`` the room parents of surviving objects are
    retained too (consulting the underlying graph's containment edges), and
    while ``pending_locations`` is true every room as well, so a following
    location selection can still name any of them.
    """
    events = frozenset(
        i for i in g.event_ids if window.contains(g.parent.event_nodes[i].interval)
    )
    spatial = frozenset(
        e.spatial for e in g.event_edges if window.contains(e.interval)
    )
    if cfg.time_hierarchy_rule is TimeRule.KEEP_ANCESTORS:
        ancestors = frozenset(
            e.parent for e in g.parent.spatial_edges if e.child in spatial
        )
        spatial |= ancestors & g.parent.spatial_nodes.keys()
        if pending_locations:
            spatial |= g.parent.room_ids()
    return g.select(spatial, events)


def prune_location(
    g: Subgraph, locations: frozenset[str], cfg: PruneConfig = PruneConfig()
) -> Subgraph:
    """Keep the named locations, their contained children, and events there.

    Event retention follows ``cfg.location_event_rule``: literal keeps events
    with an edge directly to a named location; descendant closure keeps
    events connected to any retained spatial node.
    """
    unknown = locations - g.spatial_ids
    if unknown:
        raise UnknownLocationIdError(f"not in subgraph: {sorted(unknown)}")
    children = frozenset(e.child for e in g.spatial_edges if e.parent in locations)
    spatial = locations | children
    if cfg.location_event_rule is LocationRule.LITERAL:
        events = frozenset(e.event for e in g.event_edges if e.spatial in locations)
    else:
        events = frozenset(e.event for e in g.event_edges if e.spatial in spatial)
    return g.select(spatial, events)


def prune_spatial(g: Subgraph, spatial_query: frozenset[str]) -> Subgraph:
    """Keep events involving the queried objects, then every object those
    events touch. A queried node with no events is dropped."""
    unknown = spatial_query - g.spatial_ids
    if unknown:
        raise UnknownSpatialIdError(f"not in subgraph: {sorted(unknown)}")
    events = frozenset(e.event for e in g.event_edges if e.spatial in spatial_query)
    spatial = frozenset(e.spatial for e in g.event_edges if e.event in events)
    return g.select(spatial, events)


def prune_event(g: Subgraph, event_query: frozenset[str]) -> Subgraph:
    """Keep exactly the queried events and the objects they touch."""
    unknown = event_query - g.event_ids
    if unknown:
        raise UnknownEventIdError(f"not in subgraph: {sorted(unknown)}")
    spatial = frozenset(e.spatial for e in g.event_edges if e.event in event_query)
    return g.select(spatial, event_query)


def expand_history(
    full: EggGraph, current: Subgraph, spatial_query: frozenset[str]
) -> Subgraph:
    """Expand to every event in ``full`` involving the queried objects.

    The result depends only on ``full`` and ``spatial_query`` (the queried
    objects are always retained, unlike :func:`prune_spatial`); ``current``
    is accepted for signature symmetry with the staged pipeline.
    """
    del current
    unknown = spatial_query - full.spatial_nodes.keys()
    if unknown:
        raise UnknownSpatialIdError(f"not in graph: {sorted(unknown)}")
    events = frozenset(e.event for e in full.event_edges if e.spatial in spatial_query)
    spatial = spatial_query | frozenset(
        e.spatial for e in full.event_edges if e.event in events
    )
    return Subgraph(full, spatial, events)


def merge_relevance(
    g: Subgraph, spatial_query: frozenset[str], event_query: frozenset[str]
) -> tuple[frozenset[str], frozenset[str]]:
    """Cross-filter objects and events to the pairs actually connected in ``g``.

    Returns ``(spatial_kept, events_kept)``. Undefined for empty inputs; the
    pipeline bypasses the merge in that case.
    """
    if not spatial_query or not event_query:
        raise EmptyInputSetError("relevance merge needs both an object set and an event set")
    unknown_spatial = spatial_query - g.spatial_ids
    if unknown_spatial:
        raise UnknownSpatialIdError(f"not in subgraph: {sorted(unknown_spatial)}")
    unknown_events = event_query - g.event_ids
    if unknown_events:
        raise UnknownEventIdError(f"not in subgraph: {sorted(unknown_events)}")
    pairs = {(e.event, e.spatial) for e in g.event_edges}
    spatial_kept = frozenset(
        s for s in spatial_query if any((ev, s) in pairs for ev in event_query)
    )
    events_kept = frozenset(
        ev for ev in event_query if any((ev, s) in pairs for s in spatial_query)
    )
    return spatial_kept, events_kept


def prune_pipeline(
    full: EggGraph, info: RelevantInfo, cfg: PruneConfig = PruneConfig()
) -> Subgraph:
    """Run the staged reduction from a full graph to a query-relevant subgraph.

    Stage one narrows by time window and locations. Stage two cross-filters
    the requested objects and events (when both are present) and prunes to
    them. Stage three, whenever objects were requested, expands their full
    event history from the underlying graph and re-applies the time window.
    Requested ids are first intersected with the stage-one survivors, since
    relevance extraction proposes candidates from that narrowed view.
    """
    unknown_spatial = (info.locations | info.spatial) - full.spatial_nodes.keys()
    if unknown_spatial:
        raise UnknownSpatialIdError(f"not in graph: {sorted(unknown_spatial)}")
    unknown_events = info.events - full.event_nodes.keys()
    if unknown_events:
        raise UnknownEventIdError(f"not in graph: {sorted(unknown_events)}")

    window = info.time if info.time is not None else full.horizon()
    locations = info.locations if info.locations else full.room_ids()

    stage1 = prune_location(
        prune_time(Subgraph.full(full), window, cfg, pending_locations=True),
        locations,
        cfg,
    )

    spatial_sel = info.spatial & stage1.spatial_ids
    event_sel = info.events & stage1.event_ids

    if spatial_sel and event_sel:
        spatial_kept, events_kept = merge_relevance(stage1, spatial_sel, event_sel)
        stage2 = prune_event(prune_spatial(stage1, spatial_kept), events_kept)
        expansion_seed = spatial_kept
    elif spatial_sel:
        stage2 = prune_spatial(stage1, spatial_sel)
        expansion_seed = spatial_sel
    elif event_sel:
        return prune_event(stage1, event_sel)
    else:
        return Subgraph.empty(full)

    expanded = expand_history(full, stage2, expansion_seed)
    return prune_time(expanded, window, cfg, pending_locations=False)


def compression_ratio(full: EggGraph, sub: Subgraph | EggGraph) -> float:
    """Fraction of serialized tokens removed by pruning, in [0, 1]."""
    graph = sub.materialize() if isinstance(sub, Subgraph) else sub
    full_tokens = count_tokens(serialize(full))
    if full_tokens == 0:
        return 0.0
    sub_tokens = count_tokens(serialize(graph))
    ratio = 1.0 - sub_tokens / full_tokens
    return min(1.0, max(0.0, ratio))
