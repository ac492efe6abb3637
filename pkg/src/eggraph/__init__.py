"""Event-grounded scene graphs: build, prune, serialize, and query a robot's
observation history."""

from .core import (
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
    Timestamp,
    Violation,
    add_spatial_edge,
    add_spatial_node,
    containing_room,
    events_in,
    ground_event,
    validate,
    validation_errors,
)
from .pruning import (
    LocationRule,
    PruneConfig,
    RelevantInfo,
    Subgraph,
    TimeRule,
    compression_ratio,
    expand_history,
    merge_relevance,
    prune_event,
    prune_location,
    prune_pipeline,
    prune_spatial,
    prune_time,
)
from .serialization import (
    EventRecord,
    SceneManifest,
    count_tokens,
    ingest,
    parse,
    serialize,
)

__version__ = "0.1.0"

__all__ = [
    "AttributeSnapshot",
    "EggGraph",
    "EventEdge",
    "EventGrounding",
    "EventNode",
    "EventRecord",
    "GraphBuilder",
    "Layer",
    "LocationRule",
    "Position3",
    "PruneConfig",
    "RelevantInfo",
    "SceneManifest",
    "SpatialEdge",
    "SpatialNode",
    "Subgraph",
    "TimeInterval",
    "TimeRule",
    "Timestamp",
    "Violation",
    "add_spatial_edge",
    "add_spatial_node",
    "compression_ratio",
    "containing_room",
    "count_tokens",
    "events_in",
    "expand_history",
    "ground_event",
    "ingest",
    "merge_relevance",
    "parse",
    "prune_event",
    "prune_location",
    "prune_pipeline",
    "prune_spatial",
    "prune_time",
    "serialize",
    "validate",
    "validation_errors",
]
