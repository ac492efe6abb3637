"""Shared fixtures: the shipped scene, its question set, scripted agents."""

import pytest

from eggraph import EggGraph, Subgraph
from eggraph.agents import (
    ScriptedAnswerGenerator,
    ScriptedJudge,
    ScriptedRelevanceExtractor,
    query_from_payload,
)
from eggraph.evalharness import AgentBundle
from eggraph.fixtures import fix1_dataset_payload, fix1_graph


@pytest.fixture(scope="session")
def fix1() -> EggGraph:
    return fix1_graph()


@pytest.fixture()
def fix1_full(fix1) -> Subgraph:
    return Subgraph.full(fix1)


@pytest.fixture(scope="session")
def fix1_queries():
    return [query_from_payload(entry) for entry in fix1_dataset_payload()["questions"]]


@pytest.fixture()
def scripted_bundle() -> AgentBundle:
    return AgentBundle(
        ScriptedRelevanceExtractor(), ScriptedAnswerGenerator(), ScriptedJudge()
    )
