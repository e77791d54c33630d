"""Resolved-case lookup used by the quick-answer stage."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from opsassist.llm.providers import Embedder
from opsassist.llm.types import EmbeddingVector


@dataclass(frozen=True)
class ResolvedCase:
    ticket_id: str
    summary: str
    resolution: str

    def __post_init__(self) -> None:
        if not self.summary.strip() or not self.resolution.strip():
            raise ValueError("resolved cases need a summary and a resolution")


class CaseRepository:
    def __init__(self, cases: Sequence[ResolvedCase], embedder: Embedder):
        self._cases = list(cases)
        self._embedder = embedder
        self._vectors: list[EmbeddingVector] = (
            embedder.embed([c.summary for c in self._cases]) if self._cases else []
        )

    @staticmethod
    def from_jsonl(path: str | Path, embedder: Embedder) -> "CaseRepository":
        cases: list[ResolvedCase] = []
        path = Path(path)
        if path.exists():
            with open(path, "r", encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    row = json.loads(line)
                    cases.append(
                        ResolvedCase(
                            ticket_id=row["ticket_id"],
                            summary=row["summary"],
                            resolution=row["resolution"],
                        )
                    )
        return CaseRepository(cases, embedder)

    def __len__(self) -> int:
        return len(self._cases)

    def add(self, case: ResolvedCase) -> None:
        self._cases.append(case)
        self._vectors.extend(self._embedder.embed([case.summary]))

    def top(self, query: str) -> tuple[ResolvedCase, float] | None:
        """Most similar resolved case, or None for an empty repository."""
        if not self._cases:
            return None
        qvec = self._embedder.embed([query])[0]
        best_i, best_sim = 0, -1.0
        for i, vec in enumerate(self._vectors):
            sim = qvec.cosine(vec)
            if sim > best_sim:
                best_i, best_sim = i, sim
        return self._cases[best_i], best_sim
