"""Result records for the procedure distillation pipeline."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class ScreeningVerdict:
    extractable: bool
    reason: str = ""


@dataclass(frozen=True)
class ReviewResult:
    stable: bool
    stability_score: int
    chosen_index: int | None  # 0-based index into the draft list
    groups: tuple[tuple[int, ...], ...] = ()

    def __post_init__(self) -> None:
        if self.stable and self.chosen_index is None:
            raise ValueError("a stable review must choose a representative")


@dataclass(frozen=True)
class MergeOutcome:
    action: str  # "add" | "replace"
    entry_id: str
    replaced_id: str | None = None
    branches_before: int = 0
    branches_after: int = 0

    def __post_init__(self) -> None:
        if self.action not in ("add", "replace"):
            raise ValueError(f"unknown merge action: {self.action!r}")
        if self.action == "replace" and not self.replaced_id:
            raise ValueError("replace outcomes must name the replaced entry")

    def to_dict(self) -> dict:
        return {
            "action": self.action,
            "entry_id": self.entry_id,
            "replaced_id": self.replaced_id,
            "branches_before": self.branches_before,
            "branches_after": self.branches_after,
        }


@dataclass(frozen=True)
class ExtractionReport:
    ticket_id: str
    screened_out: bool = False
    reason: str = ""
    runs: int = 0
    valid_drafts: int = 0
    stability_score: int = 0
    escalated: bool = False
    outcome: MergeOutcome | None = None
    flags: tuple[str, ...] = field(default_factory=tuple)

    def to_dict(self) -> dict:
        return {
            "ticket_id": self.ticket_id,
            "screened_out": self.screened_out,
            "reason": self.reason,
            "runs": self.runs,
            "valid_drafts": self.valid_drafts,
            "stability_score": self.stability_score,
            "escalated": self.escalated,
            "outcome": self.outcome.to_dict() if self.outcome else None,
            "flags": list(self.flags),
        }
