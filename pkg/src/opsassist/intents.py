"""Clarified request records shared by the chat pipeline and the engine."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping

from opsassist.config import PipelineConfig

REQUEST_TYPES = ("troubleshooting", "consultation")


@dataclass(frozen=True)
class UserRequest:
    session_id: str
    text: str
    channel: str = "chat"
    structured_context: Mapping[str, Any] | None = None

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValueError("request text must be non-empty")


@dataclass(frozen=True)
class IntentRecord:
    """What the user wants, after typing and field extraction."""

    request_type: str
    clarified_text: str
    required_fields: tuple[str, ...] = ()
    missing_fields: tuple[str, ...] = ()
    extracted: Mapping[str, str] = field(default_factory=dict)
    keywords: tuple[str, ...] = ()
    flags: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.request_type not in REQUEST_TYPES:
            raise ValueError(f"unknown request type: {self.request_type!r}")
        if not self.clarified_text.strip():
            raise ValueError("clarified_text must be non-empty")
        for name in self.missing_fields:
            if name not in self.required_fields:
                raise ValueError(f"missing field {name!r} is not among required fields")

    @property
    def complete(self) -> bool:
        return not self.missing_fields

    def to_dict(self) -> dict:
        return {
            "request_type": self.request_type,
            "clarified_text": self.clarified_text,
            "required_fields": list(self.required_fields),
            "missing_fields": list(self.missing_fields),
            "extracted": dict(sorted(self.extracted.items())),
            "keywords": list(self.keywords),
            "flags": list(self.flags),
        }


def required_fields_for(request_type: str, config: PipelineConfig) -> tuple[tuple[str, ...], tuple[tuple[str, ...], ...]]:
    """(all-of fields, any-of groups) for a request type."""
    table = config.required_fields.get(request_type, {})
    must = tuple(table.get("all", ()))
    groups = tuple(tuple(g) for g in table.get("any", ()))
    return must, groups


def compute_fields(
    request_type: str, present: Mapping[str, str], config: PipelineConfig
) -> tuple[tuple[str, ...], tuple[str, ...]]:
    """Flatten requirements and report what is still missing.

    Any-of groups are rendered as 'a|b' in both lists; a group is satisfied
    when any member is present with a non-empty value.
    """
    must, groups = required_fields_for(request_type, config)
    required: list[str] = list(must)
    missing: list[str] = []
    for name in must:
        if not str(present.get(name, "")).strip():
            missing.append(name)
    for group in groups:
        label = "|".join(group)
        required.append(label)
        if not any(str(present.get(name, "")).strip() for name in group):
            missing.append(label)
    return tuple(required), tuple(missing)


def intent_from_structured_context(
    context: Mapping[str, Any], config: PipelineConfig
) -> IntentRecord:
    """Build an intent directly from a console-style structured request.

    The console path skips conversational clarification: the caller already
    supplies typed fields, so the same record shape is produced verbatim.
    """
    request_type = str(context.get("request_type", "troubleshooting"))
    if request_type not in REQUEST_TYPES:
        raise ValueError(f"unknown request type: {request_type!r}")
    fields_in = {
        str(k): str(v)
        for k, v in (context.get("fields") or {}).items()
        if str(v).strip()
    }
    text = str(context.get("text", "")).strip()
    if not text:
        parts = [f"{k}: {v}" for k, v in sorted(fields_in.items())]
        text = "; ".join(parts)
    if not text:
        raise ValueError("structured context carries no text or fields")
    required, missing = compute_fields(request_type, fields_in, config)
    keywords = tuple(str(k) for k in context.get("keywords", ()) if str(k).strip())
    flags = ("incomplete_fields",) if missing else ()
    return IntentRecord(
        request_type=request_type,
        clarified_text=text,
        required_fields=required,
        missing_fields=missing,
        extracted=fields_in,
        keywords=keywords,
        flags=flags,
    )
