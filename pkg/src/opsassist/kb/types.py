"""Knowledge base value types."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from typing import Any, Mapping

from opsassist.llm.types import EmbeddingVector

PROVENANCE_KINDS = ("manual", "distilled", "web")


class Level(IntEnum):
    """Knowledge levels ordered by trust; retrieval walks them top-down."""

    SOP = 1
    INTERNAL = 2
    WEB = 3
    MODEL = 4


@dataclass(frozen=True)
class Provenance:
    kind: str
    ref: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in PROVENANCE_KINDS:
            raise ValueError(f"unknown provenance kind: {self.kind!r}")

    def to_dict(self) -> dict:
        out: dict[str, Any] = {"kind": self.kind}
        if self.ref is not None:
            out["ref"] = self.ref
        return out

    @staticmethod
    def from_dict(raw: Mapping[str, Any]) -> "Provenance":
        return Provenance(kind=raw["kind"], ref=raw.get("ref"))


@dataclass(frozen=True)
class KnowledgeEntry:
    """One retrievable unit: a lookup key plus the full payload text."""

    id: str
    level: Level
    base_id: str
    key: str
    value: str
    provenance: tuple[Provenance, ...] = ()

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("entry id must be non-empty")
        if not self.key.strip():
            raise ValueError("entry key must be non-empty")
        if self.level not in (Level.SOP, Level.INTERNAL):
            raise ValueError("stored entries live at level 1 or 2 only")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "level": int(self.level),
            "base_id": self.base_id,
            "key": self.key,
            "value": self.value,
            "provenance": [p.to_dict() for p in self.provenance],
        }

    @staticmethod
    def from_dict(raw: Mapping[str, Any]) -> "KnowledgeEntry":
        return KnowledgeEntry(
            id=raw["id"],
            level=Level(int(raw["level"])),
            base_id=raw["base_id"],
            key=raw["key"],
            value=raw["value"],
            provenance=tuple(Provenance.from_dict(p) for p in raw.get("provenance", ())),
        )


@dataclass(frozen=True)
class EvidenceItem:
    """One retrieved hit, identified by a stable ref used in citations."""

    ref: str
    level: int
    score: float
    text: str
    title: str = ""

    def to_dict(self) -> dict:
        return {
            "ref": self.ref,
            "level": self.level,
            "score": self.score,
            "text": self.text,
            "title": self.title,
        }

    @staticmethod
    def from_dict(raw: Mapping[str, Any]) -> "EvidenceItem":
        return EvidenceItem(
            ref=raw["ref"],
            level=int(raw["level"]),
            score=float(raw["score"]),
            text=raw["text"],
            title=raw.get("title", ""),
        )


@dataclass(frozen=True)
class EvidenceSet:
    items: tuple[EvidenceItem, ...] = ()
    flags: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        refs = [item.ref for item in self.items]
        if len(refs) != len(set(refs)):
            raise ValueError("duplicate refs in evidence set")
        scores = [item.score for item in self.items]
        if any(a < b for a, b in zip(scores, scores[1:])):
            raise ValueError("evidence items must be ordered by descending score")

    def refs(self) -> tuple[str, ...]:
        return tuple(item.ref for item in self.items)

    def to_dict(self) -> dict:
        return {
            "items": [item.to_dict() for item in self.items],
            "flags": list(self.flags),
        }

    @staticmethod
    def from_dict(raw: Mapping[str, Any]) -> "EvidenceSet":
        return EvidenceSet(
            items=tuple(EvidenceItem.from_dict(i) for i in raw.get("items", ())),
            flags=tuple(raw.get("flags", ())),
        )


@dataclass(frozen=True)
class RetrievalQuery:
    text: str
    level: Level
    k: int = 5
    coarse_size: int = 50

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValueError("query text must be non-empty")
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if self.coarse_size < self.k:
            raise ValueError("coarse size must be at least k")


@dataclass(frozen=True)
class Candidate:
    """Coarse-stage hit with per-channel ranks for fusion."""

    entry: KnowledgeEntry
    lexical_rank: int | None = None
    embedding_rank: int | None = None
    lexical_score: float = 0.0
    embedding_score: float = 0.0
    fused_score: float = field(default=0.0, compare=False)
