"""Relevance extraction, answer generation, and answer judging.

Two families ship: scripted agents (deterministic keyword/rule logic, no
network) and remote agents speaking to a chat-completion endpoint with
record/replay support.
"""

from .base import (
    AgentConfig,
    Answer,
    AnswerGenerator,
    AnswerJudge,
    AnswerPayload,
    Modality,
    QueryRecord,
    RelevanceExtractor,
    load_dataset,
    payload_from_json,
    payload_repr,
    payload_to_json,
    query_from_payload,
    query_to_payload,
    render_answer_prompt,
    resolve_event_refs,
    resolve_spatial_names,
)
from .remote import (
    ChatClient,
    HttpTransport,
    RecordingTransport,
    RemoteAnswerGenerator,
    RemoteJudge,
    RemoteRelevanceExtractor,
    ReplayTransport,
    Transport,
    build_transport,
    request_key,
)
from .scripted import (
    ScriptedAnswerGenerator,
    ScriptedJudge,
    ScriptedRelevanceExtractor,
    token_f1,
)

__all__ = [
    "AgentConfig",
    "Answer",
    "AnswerGenerator",
    "AnswerJudge",
    "AnswerPayload",
    "ChatClient",
    "HttpTransport",
    "Modality",
    "QueryRecord",
    "RecordingTransport",
    "RelevanceExtractor",
    "RemoteAnswerGenerator",
    "RemoteJudge",
    "RemoteRelevanceExtractor",
    "ReplayTransport",
    "ScriptedAnswerGenerator",
    "ScriptedJudge",
    "ScriptedRelevanceExtractor",
    "Transport",
    "build_transport",
    "load_dataset",
    "payload_from_json",
    "payload_repr",
    "payload_to_json",
    "query_from_payload",
    "query_to_payload",
    "render_answer_prompt",
    "request_key",
    "resolve_event_refs",
    "resolve_spatial_names",
    "token_f1",
]
