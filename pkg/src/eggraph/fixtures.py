"""Loaders for the shipped normative test scene.

The scene has two rooms (a coffee room and an office) and four objects; the
red ceramic mug is carried from the coffee room to the office partway
through the observation horizon. Three events are grounded: making coffee,
carrying the mug, and working on the laptop. The blue mug participates in
no event. All timestamps are small microsecond values.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from .core import EggGraph
from .serialization import (
    EventRecord,
    SceneManifest,
    dataset_payload_from_text,
    ingest,
    load_manifest,
    records_from_jsonl,
)

_DATA = resources.files("eggraph").joinpath("data", "fix1")


def fixture_path(name: str) -> Path:
    """Filesystem path of a shipped fixture file (for CLI round-trips)."""
    return Path(str(_DATA.joinpath(name)))


def fix1_manifest() -> SceneManifest:
    return load_manifest(fixture_path("scene.manifest.json"))


def fix1_records() -> list[EventRecord]:
    return records_from_jsonl(_DATA.joinpath("events.records.jsonl").read_text(encoding="utf-8"))


def fix1_graph() -> EggGraph:
    return ingest(fix1_manifest(), fix1_records())


def fix1_dataset_payload() -> dict:
    return dataset_payload_from_text(
        _DATA.joinpath("dataset.qa.json").read_text(encoding="utf-8")
    )
