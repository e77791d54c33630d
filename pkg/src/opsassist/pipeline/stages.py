"""Individual chat pipeline stages: intent, clarification, routing, quick answers."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Sequence

from opsassist.errors import BudgetExceeded, MalformedOutput
from opsassist.intents import REQUEST_TYPES, IntentRecord
from opsassist.llm.gateway import CallLog, LLMGateway
from opsassist.llm.schema import SchemaDescriptor
from opsassist.llm.types import Budget, ChatRequest, Message
from opsassist.tickets.repo import CaseRepository

INTENT_SCHEMA = SchemaDescriptor(
    name="intent_screen",
    required=("in_scope",),
    types={"in_scope": bool, "request_type": str},
    validator=lambda record: (
        ["request_type must be troubleshooting or consultation when in scope"]
        if record.get("in_scope") is True and record.get("request_type") not in REQUEST_TYPES
        else []
    ),
)

CLARIFY_SCHEMA = SchemaDescriptor(
    name="field_extraction",
    required=(),
    types={"fields": dict, "keywords": list},
)

SIMPLICITY_SCHEMA = SchemaDescriptor(
    name="simplicity_probe", required=("simple",), types={"simple": bool}
)


def classify_intent(
    gateway: LLMGateway,
    text: str,
    budget: Budget | None = None,
    log: CallLog | None = None,
) -> tuple[bool, str, tuple[str, ...]]:
    """Stage 1: is this request in scope, and which type is it?"""
    prompt = "\n".join(
        [
            "You are the intake filter of a data platform operations assistant.",
            "Decide whether this message is in scope: platform troubleshooting",
            "(something failed) or platform consultation (how-to or concept",
            "questions). Anything else, including small talk, is out of scope.",
            f"Message: {text}",
            'Reply with one JSON object: {"in_scope": <bool>, "request_type":'
            ' "troubleshooting" | "consultation"}',
        ]
    )
    try:
        record, _ = gateway.chat_structured(
            ChatRequest(messages=(Message("user", prompt),), tag="intent"),
            INTENT_SCHEMA,
            budget=budget,
            log=log,
        )
    except MalformedOutput:
        # unreadable screen must not bounce a potentially valid request
        return True, "troubleshooting", ("intent_malformed",)
    if record["in_scope"] is not True:
        return False, "", ()
    return True, str(record["request_type"]), ()


def extract_fields(
    gateway: LLMGateway,
    request_type: str,
    conversation: str,
    field_names: Sequence[str],
    budget: Budget | None = None,
    log: CallLog | None = None,
) -> tuple[dict[str, str], tuple[str, ...], tuple[str, ...]]:
    """Stage 2 helper: pull structured fields out of the conversation."""
    prompt = "\n".join(
        [
            f"Extract structured fields from this {request_type} conversation.",
            "Conversation:",
            conversation,
            "Fields to look for: " + ", ".join(field_names),
            'Reply with one JSON object: {"fields": {"<name>": "<value>", ...},'
            ' "keywords": ["<topic keyword>", ...]}. Omit fields that are not'
            " present; never invent values.",
        ]
    )
    try:
        record, _ = gateway.chat_structured(
            ChatRequest(messages=(Message("user", prompt),), tag="clarify"),
            CLARIFY_SCHEMA,
            budget=budget,
            log=log,
        )
    except MalformedOutput:
        return {}, (), ("clarify_malformed",)
    fields = {
        str(k): str(v)
        for k, v in (record.get("fields") or {}).items()
        if str(v).strip()
    }
    keywords = tuple(str(k) for k in record.get("keywords") or () if str(k).strip())
    return fields, keywords, ()


@dataclass(frozen=True)
class AgentSpec:
    name: str
    keywords: tuple[str, ...]
    description: str = ""

    def __post_init__(self) -> None:
        if not self.keywords:
            raise ValueError(f"agent {self.name!r} needs at least one keyword")


@dataclass(frozen=True)
class RoutingDecision:
    target: str
    best_similarity: float
    matched_keyword: str = ""
    flags: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "target": self.target,
            "best_similarity": self.best_similarity,
            "matched_keyword": self.matched_keyword,
            "flags": list(self.flags),
        }


class AgentRegistry:
    """Routes intents to specialized agents by keyword similarity."""

    def __init__(self, agents: Sequence[AgentSpec], embedder):
        self._agents = tuple(agents)
        self._embedder = embedder
        self._vectors = {
            agent.name: embedder.embed(list(agent.keywords)) for agent in self._agents
        }

    def names(self) -> tuple[str, ...]:
        return tuple(agent.name for agent in self._agents)

    def route(self, intent: IntentRecord, threshold: float) -> RoutingDecision:
        if not self._agents:
            return RoutingDecision(target="general", best_similarity=0.0)
        queries = list(intent.keywords) or [intent.clarified_text]
        try:
            query_vectors = self._embedder.embed(queries)
        except Exception:
            return RoutingDecision(
                target="general",
                best_similarity=0.0,
                flags=("routing_embedding_failed",),
            )
        best_name, best_keyword, best_score = "general", "", -1.0
        for agent in self._agents:
            for keyword, avec in zip(agent.keywords, self._vectors[agent.name]):
                for qvec in query_vectors:
                    sim = qvec.cosine(avec)
                    if sim > best_score:
                        best_name, best_keyword, best_score = agent.name, keyword, sim
        if best_score >= threshold:
            return RoutingDecision(
                target=best_name,
                best_similarity=best_score,
                matched_keyword=best_keyword,
            )
        return RoutingDecision(
            target="general",
            best_similarity=max(best_score, 0.0),
            matched_keyword=best_keyword,
        )


def quick_answer(
    gateway: LLMGateway,
    repo: CaseRepository | None,
    intent: IntentRecord,
    threshold: float,
    budget: Budget | None = None,
    log: CallLog | None = None,
) -> tuple[str | None, tuple[str, ...], dict]:
    """Stage 3: repository hit or a direct answer for plainly simple asks.

    Returns (answer text or None, citations, stage record).
    """
    stage: dict[str, Any] = {"stage": "quick_answer", "used": False, "source": None}
    hit = repo.top(intent.clarified_text) if repo is not None and len(repo) else None
    if hit is not None:
        case, similarity = hit
        stage["best_case"] = case.ticket_id
        stage["similarity"] = similarity
        if similarity >= threshold:
            stage["used"] = True
            stage["source"] = "case"
            text = "\n".join(
                [
                    f"A very similar resolved case was found (ticket {case.ticket_id}).",
                    f"Summary: {case.summary}",
                    f"Resolution: {case.resolution}",
                ]
            )
            return text, (case.ticket_id,), stage
    probe = "\n".join(
        [
            "Is this request simple enough to answer directly from general",
            "knowledge, without searching the knowledge base? Requests that",
            "mention specific failures, error logs, or internal systems are",
            "not simple.",
            f"Request type: {intent.request_type}",
            f"Request: {intent.clarified_text}",
            'Reply with one JSON object: {"simple": <bool>}',
        ]
    )
    try:
        record, _ = gateway.chat_structured(
            ChatRequest(messages=(Message("user", probe),), tag="simplicity"),
            SIMPLICITY_SCHEMA,
            budget=budget,
            log=log,
        )
    except (MalformedOutput, BudgetExceeded):
        return None, (), stage
    if record["simple"] is not True:
        return None, (), stage
    try:
        reply = gateway.chat(
            ChatRequest(
                messages=(
                    Message(
                        "user",
                        "Answer this platform question briefly and directly.\n"
                        + intent.clarified_text,
                    ),
                ),
                tag="quick",
            ),
            budget=budget,
            log=log,
        )
    except BudgetExceeded:
        return None, (), stage
    stage["used"] = True
    stage["source"] = "direct"
    return reply.text, (), stage
