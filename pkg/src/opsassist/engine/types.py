"""Engine state, decisions, traces, and the final answer record."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping

from opsassist.intents import IntentRecord
from opsassist.kb.types import EvidenceSet
from opsassist.textutil import canonical_json


@dataclass(frozen=True)
class EngineOptions:
    """How one investigation run behaves."""

    flat: bool = False
    use_filter: bool = True
    k: int = 5
    max_iterations: int = 8

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")

    @property
    def mode_name(self) -> str:
        if self.flat:
            return "flat_nofilter" if not self.use_filter else "flat"
        return "hierarchical" if self.use_filter else "hierarchical_nofilter"


@dataclass(frozen=True)
class PlannerDecision:
    ans_ready: bool
    act: str | None = None  # "tool" | "retrieve"
    tool_name: str | None = None
    tool_args: Mapping[str, Any] = field(default_factory=dict)
    level: int | None = None
    query: str | None = None
    flags: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "ans_ready": self.ans_ready,
            "act": self.act,
            "tool_name": self.tool_name,
            "tool_args": dict(sorted(self.tool_args.items())) if self.tool_args else {},
            "level": self.level,
            "query": self.query,
            "flags": list(self.flags),
        }


@dataclass(frozen=True)
class EvidenceRecord:
    """One action and what it observed; the evidence list is append-only."""

    kind: str  # "tool" | "retrieval" | "note"
    action: str
    ref: str | None = None
    observation: str | None = None
    items: EvidenceSet | None = None

    def citation_refs(self) -> tuple[str, ...]:
        if self.kind == "tool" and self.ref:
            return (self.ref,)
        if self.items is not None:
            return self.items.refs()
        return ()


@dataclass
class SolvingState:
    intent: IntentRecord
    evidence: list[EvidenceRecord] = field(default_factory=list)
    iteration: int = 0
    current_level: int = 1

    def valid_refs(self) -> tuple[str, ...]:
        seen: list[str] = []
        for record in self.evidence:
            for ref in record.citation_refs():
                if ref not in seen:
                    seen.append(ref)
        return tuple(seen)


@dataclass
class IterationRecord:
    iteration: int
    decision: dict
    action: str  # "ready" | "tool" | "retrieve" | "model_knowledge"
    level: int | None = None
    query: str | None = None
    tool: str | None = None
    tool_args: dict | None = None
    observation: str | None = None
    candidates: list[dict] = field(default_factory=list)
    kept: list[str] = field(default_factory=list)
    flags: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        candidate_refs = {c["ref"] for c in self.candidates}
        bad = [ref for ref in self.kept if ref not in candidate_refs]
        if bad:
            raise ValueError(f"kept refs not among candidates: {bad}")

    def to_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "decision": self.decision,
            "action": self.action,
            "level": self.level,
            "query": self.query,
            "tool": self.tool,
            "tool_args": self.tool_args,
            "observation": self.observation,
            "candidates": self.candidates,
            "kept": self.kept,
            "flags": self.flags,
        }


@dataclass
class Trace:
    """Deterministic run record: no wall-clock values, no request ids."""

    mode: str
    request: dict
    iterations: list[IterationRecord] = field(default_factory=list)
    answer: dict = field(default_factory=dict)
    budget: dict = field(default_factory=dict)
    flags: list[str] = field(default_factory=list)

    def retrieval_iterations(self) -> int:
        return sum(1 for rec in self.iterations if rec.action == "retrieve")

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "request": self.request,
            "iterations": [rec.to_dict() for rec in self.iterations],
            "answer": self.answer,
            "budget": self.budget,
            "flags": self.flags,
        }

    def canonical_bytes(self) -> bytes:
        return canonical_json(self.to_dict()).encode("utf-8")


@dataclass(frozen=True)
class FinalAnswer:
    request_type: str
    text: str
    root_cause: str = ""
    explanation: str = ""
    recommendation: str = ""
    investigation_steps: tuple[str, ...] = ()
    resolution_steps: tuple[str, ...] = ()
    missing_information: tuple[str, ...] = ()
    citations: tuple[str, ...] = ()
    confirmed_findings: tuple[str, ...] = ()
    hypotheses: tuple[str, ...] = ()
    flags: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "request_type": self.request_type,
            "text": self.text,
            "root_cause": self.root_cause,
            "explanation": self.explanation,
            "recommendation": self.recommendation,
            "investigation_steps": list(self.investigation_steps),
            "resolution_steps": list(self.resolution_steps),
            "missing_information": list(self.missing_information),
            "citations": list(self.citations),
            "confirmed_findings": list(self.confirmed_findings),
            "hypotheses": list(self.hypotheses),
            "flags": list(self.flags),
        }

    def canonical_bytes(self) -> bytes:
        return canonical_json(self.to_dict()).encode("utf-8")
