"""Ticket records, structured labels, and cause assignment results."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping

TICKET_STATUSES = ("pending", "labeled", "manual", "assigned")


@dataclass(frozen=True)
class Ticket:
    id: str
    turns: tuple[tuple[str, str], ...]  # (role, text)
    outcome: str = ""
    status: str = "pending"

    def __post_init__(self) -> None:
        if not self.turns:
            raise ValueError("ticket needs at least one turn")
        if self.status not in TICKET_STATUSES:
            raise ValueError(f"unknown ticket status: {self.status!r}")
        for role, text in self.turns:
            if role not in ("user", "assistant", "engineer"):
                raise ValueError(f"unknown turn role: {role!r}")
            if not str(text).strip():
                raise ValueError("ticket turns must be non-empty")

    def text(self) -> str:
        return "\n".join(f"{role}: {text}" for role, text in self.turns)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "turns": [[role, text] for role, text in self.turns],
            "outcome": self.outcome,
            "status": self.status,
        }

    @staticmethod
    def from_dict(raw: Mapping[str, Any]) -> "Ticket":
        return Ticket(
            id=raw["id"],
            turns=tuple((t[0], t[1]) for t in raw["turns"]),
            outcome=raw.get("outcome", ""),
            status=raw.get("status", "pending"),
        )


@dataclass(frozen=True)
class TicketLabels:
    """Structured summary of one resolved ticket."""

    system: str
    module: str
    request_type: str
    summary: str
    keywords: tuple[str, ...] = ()
    final_actions: tuple[str, ...] = ()
    flags: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        for name in ("system", "module", "request_type", "summary"):
            if not getattr(self, name).strip():
                raise ValueError(f"label field {name!r} must be non-empty")

    def features(self) -> tuple[str, ...]:
        """Categorical features consumed by the cause model."""
        feats = [
            f"system:{self.system.strip().lower()}",
            f"module:{self.module.strip().lower()}",
            f"request_type:{self.request_type.strip().lower()}",
        ]
        feats.extend(f"action:{a.strip().lower()}" for a in self.final_actions)
        return tuple(dict.fromkeys(feats))

    def to_dict(self) -> dict:
        return {
            "system": self.system,
            "module": self.module,
            "request_type": self.request_type,
            "summary": self.summary,
            "keywords": list(self.keywords),
            "final_actions": list(self.final_actions),
            "flags": list(self.flags),
        }

    @staticmethod
    def from_dict(raw: Mapping[str, Any]) -> "TicketLabels":
        return TicketLabels(
            system=raw["system"],
            module=raw["module"],
            request_type=raw["request_type"],
            summary=raw["summary"],
            keywords=tuple(raw.get("keywords", ())),
            final_actions=tuple(raw.get("final_actions", ())),
            flags=tuple(raw.get("flags", ())),
        )


@dataclass(frozen=True)
class AssignmentResult:
    cause: str | None
    confidence: float
    decision: str  # "auto" | "manual_review"
    posterior: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.decision not in ("auto", "manual_review"):
            raise ValueError(f"unknown decision: {self.decision!r}")
        if self.decision == "auto" and not self.cause:
            raise ValueError("auto decisions must carry a cause")

    def to_dict(self) -> dict:
        return {
            "cause": self.cause,
            "confidence": self.confidence,
            "decision": self.decision,
            "posterior": dict(sorted(self.posterior.items())),
        }
