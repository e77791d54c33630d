from opsassist.llm.types import Budget, ChatRequest, ChatResponse, EmbeddingVector, Message
from opsassist.llm.fingerprint import canonical_prompt, fingerprint
from opsassist.llm.schema import SchemaDescriptor, parse_object
from opsassist.llm.gateway import CallLog, LLMGateway
from opsassist.llm.providers import (
    ChatProvider,
    Embedder,
    HashingEmbedder,
    HttpChatProvider,
    HttpEmbedder,
    RecordingProvider,
    ReplayProvider,
    Rule,
    ScriptedProvider,
    load_transcript,
    write_transcript,
)

__all__ = [
    "Budget",
    "CallLog",
    "ChatProvider",
    "ChatRequest",
    "ChatResponse",
    "Embedder",
    "EmbeddingVector",
    "HashingEmbedder",
    "HttpChatProvider",
    "HttpEmbedder",
    "LLMGateway",
    "Message",
    "RecordingProvider",
    "ReplayProvider",
    "Rule",
    "SchemaDescriptor",
    "ScriptedProvider",
    "canonical_prompt",
    "fingerprint",
    "load_transcript",
    "parse_object",
    "write_transcript",
]
