"""Prompt rendering and reply schemas for the investigation loop.

Every prompt is deterministic for a given state so recorded transcripts
replay exactly.
"""

from __future__ import annotations

from functools import lru_cache
from importlib import resources
from string import Template
from typing import Any, Mapping, Sequence

from opsassist.engine.types import EvidenceRecord, SolvingState
from opsassist.intents import IntentRecord
from opsassist.kb.types import EvidenceItem
from opsassist.llm.schema import SchemaDescriptor

MODEL_LEVEL_LINE = (
    "Level 4: the model's own general knowledge. No retriever exists here; "
    "when the levels above are exhausted, set ans_ready to true and answer "
    "from general knowledge."
)


@lru_cache(maxsize=1)
def _planner_template() -> Template:
    text = (
        resources.files("opsassist.engine").joinpath("planner_prompt.txt").read_text("utf-8")
    )
    return Template(text)


def render_levels(described: Sequence[tuple[int, str]]) -> str:
    lines = [f"Level {level}: {desc}" for level, desc in described]
    lines.append(MODEL_LEVEL_LINE)
    return "\n".join(lines)


def _shorten(text: str, cap: int = 280) -> str:
    text = " ".join(text.split())
    if len(text) <= cap:
        return text
    return text[:cap] + " ..."


def render_evidence(evidence: Sequence[EvidenceRecord]) -> str:
    if not evidence:
        return "(no evidence collected yet)"
    lines: list[str] = []
    for i, record in enumerate(evidence, start=1):
        lines.append(f"[{i}] {record.action}")
        if record.kind == "tool" and record.observation is not None:
            lines.append(f"    ref={record.ref}")
            lines.append(f"    observation: {_shorten(record.observation, 600)}")
        elif record.items is not None:
            if not record.items.items:
                lines.append("    (nothing kept)")
            for item in record.items.items:
                lines.append(f"    ref={item.ref} level={item.level} title={_shorten(item.title, 120)}")
                lines.append(f"      {_shorten(item.text, 400)}")
        elif record.observation is not None:
            lines.append(f"    note: {_shorten(record.observation, 300)}")
    return "\n".join(lines)


def render_planner_prompt(
    state: SolvingState,
    *,
    tools_text: str,
    levels_text: str,
    background: str,
    max_iterations: int,
) -> str:
    return _planner_template().substitute(
        tools=tools_text,
        retrievers=levels_text,
        background=background.strip() or "(none)",
        request_type=state.intent.request_type,
        request=state.intent.clarified_text,
        current_level=str(state.current_level),
        iteration=str(state.iteration),
        max_iterations=str(max_iterations),
        evidence_count=str(len(state.evidence)),
        evidence=render_evidence(state.evidence),
    )


def planner_schema(levels: Sequence[int], tool_names: Sequence[str]) -> SchemaDescriptor:
    allowed_levels = set(levels)
    allowed_tools = set(tool_names)

    def validate(record: Mapping[str, Any]) -> list[str]:
        problems: list[str] = []
        if record.get("ans_ready") is True:
            return problems
        act = record.get("act")
        if act not in ("tool", "retrieve"):
            problems.append("act must be 'tool' or 'retrieve' when ans_ready is false")
            return problems
        if act == "tool":
            tool = record.get("tool")
            if not isinstance(tool, Mapping) or not str(tool.get("name", "")).strip():
                problems.append("act 'tool' needs tool.name")
            elif allowed_tools and tool["name"] not in allowed_tools:
                problems.append(f"unknown tool {tool['name']!r}")
        else:
            level = record.get("level")
            if not isinstance(level, int) or isinstance(level, bool):
                problems.append("act 'retrieve' needs an integer level")
            elif allowed_levels and level not in allowed_levels and level != 4:
                # clamping handles out-of-range values; only nonsense is rejected
                if level < 1 or level > 4:
                    problems.append(f"level {level} is outside 1..4")
            if not str(record.get("query", "")).strip():
                problems.append("act 'retrieve' needs a non-empty query")
        return problems

    return SchemaDescriptor(
        name="planner_decision",
        required=("ans_ready",),
        types={"ans_ready": bool, "query": str},
        validator=validate,
    )


def render_filter_prompt(
    intent: IntentRecord, query: str, candidates: Sequence[EvidenceItem]
) -> str:
    lines = [
        "You are screening retrieved snippets for relevance.",
        f"Request type: {intent.request_type}",
        f"Request: {intent.clarified_text}",
        f"Search query: {query}",
        f"Candidates: {len(candidates)}",
    ]
    for item in candidates:
        lines.append(f"- ref={item.ref} title={_shorten(item.title, 120)}")
        lines.append(f"  {_shorten(item.text, 400)}")
    lines.append(
        'Reply with one JSON object: {"keep": ["<ref>", ...]} listing only the'
        " refs above that directly help answer the request. Keep the original"
        " order and never invent refs."
    )
    return "\n".join(lines)


def filter_schema(allowed_refs: Sequence[str]) -> SchemaDescriptor:
    allowed = set(allowed_refs)

    def validate(record: Mapping[str, Any]) -> list[str]:
        problems: list[str] = []
        keep = record.get("keep")
        if not isinstance(keep, list):
            problems.append("keep must be a list of refs")
            return problems
        for ref in keep:
            if not isinstance(ref, str):
                problems.append("keep entries must be strings")
            elif ref not in allowed:
                problems.append(f"unknown ref {ref!r}")
        return problems

    return SchemaDescriptor(name="evidence_filter", required=(), types={}, validator=validate)


def render_summary_prompt(state: SolvingState, valid_refs: Sequence[str]) -> str:
    intent = state.intent
    lines = [
        "Write the final answer for this request using only the evidence below.",
        f"Request type: {intent.request_type}",
        f"Request: {intent.clarified_text}",
    ]
    if intent.missing_fields:
        lines.append("Known missing fields: " + ", ".join(intent.missing_fields))
    lines.append(f"Evidence items: {len(state.evidence)}")
    lines.append(render_evidence(state.evidence))
    lines.append(
        "Valid citation refs: " + (", ".join(valid_refs) if valid_refs else "(none)")
    )
    if intent.request_type == "troubleshooting":
        lines.append(
            "Reply with one JSON object with keys: root_cause (string),"
            " investigation_steps (list of strings), resolution_steps (list of"
            " strings), confirmed_findings (list), hypotheses (list),"
            " missing_information (list), citations (list of refs)."
        )
    else:
        lines.append(
            "Reply with one JSON object with keys: explanation (string),"
            " recommendation (string), missing_information (list),"
            " citations (list of refs)."
        )
    lines.append("Cite only refs from the valid list. Do not invent evidence.")
    return "\n".join(lines)


def summary_schema(request_type: str) -> SchemaDescriptor:
    list_fields = {
        "investigation_steps": list,
        "resolution_steps": list,
        "confirmed_findings": list,
        "hypotheses": list,
        "missing_information": list,
        "citations": list,
    }
    if request_type == "troubleshooting":
        return SchemaDescriptor(
            name="answer_troubleshooting",
            required=("root_cause",),
            types={"root_cause": str, **list_fields},
        )
    return SchemaDescriptor(
        name="answer_consultation",
        required=("explanation", "recommendation"),
        types={"explanation": str, "recommendation": str, **list_fields},
    )
