"""Two-stage retrieval: coarse recall union, then rank fusion, then top-k."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from opsassist.kb.lexical import LexicalIndex
from opsassist.kb.types import Candidate, EvidenceItem, EvidenceSet, KnowledgeEntry, RetrievalQuery
from opsassist.llm.types import EmbeddingVector

DEFAULT_RRF_CONSTANT = 60


@dataclass(frozen=True)
class SearchIndex:
    """Immutable snapshot of a set of entries ready for search."""

    entries: tuple[KnowledgeEntry, ...]
    lexical: LexicalIndex
    matrix: np.ndarray | None  # one unit row per entry, aligned with entries

    @staticmethod
    def build(
        entries: Sequence[KnowledgeEntry],
        vectors: Sequence[EmbeddingVector] | None = None,
    ) -> "SearchIndex":
        docs = [entry.key + "\n" + entry.value for entry in entries]
        matrix = None
        if vectors is not None:
            if len(vectors) != len(entries):
                raise ValueError("one vector per entry required")
            if entries:
                matrix = np.array([v.values for v in vectors], dtype=np.float64)
                norms = np.linalg.norm(matrix, axis=1, keepdims=True)
                norms[norms == 0.0] = 1.0
                matrix = matrix / norms
        return SearchIndex(
            entries=tuple(entries), lexical=LexicalIndex(docs), matrix=matrix
        )


def coarse_retrieve(
    query: RetrievalQuery,
    index: SearchIndex,
    query_vector: EmbeddingVector | None = None,
) -> tuple[list[Candidate], tuple[str, ...]]:
    """Union of top-N lexical and top-N embedding hits with per-channel ranks."""
    flags: list[str] = []
    n = query.coarse_size
    lex_hits = index.lexical.top(query.text, n)
    emb_hits: list[tuple[int, float]] = []
    if query_vector is not None and index.matrix is not None:
        sims = index.matrix @ np.asarray(query_vector.values, dtype=np.float64)
        order = sorted(range(len(sims)), key=lambda i: (-sims[i], i))[:n]
        emb_hits = [(i, float(sims[i])) for i in order]
    elif query_vector is None:
        flags.append("lexical_only")

    by_index: dict[int, Candidate] = {}
    for rank, (i, score) in enumerate(lex_hits, start=1):
        by_index[i] = Candidate(
            entry=index.entries[i], lexical_rank=rank, lexical_score=score
        )
    for rank, (i, score) in enumerate(emb_hits, start=1):
        existing = by_index.get(i)
        if existing is None:
            by_index[i] = Candidate(
                entry=index.entries[i], embedding_rank=rank, embedding_score=score
            )
        else:
            by_index[i] = replace(existing, embedding_rank=rank, embedding_score=score)
    candidates = [by_index[i] for i in sorted(by_index)]
    return candidates, tuple(flags)


def rerank(candidates: Sequence[Candidate], rrf_constant: int = DEFAULT_RRF_CONSTANT) -> list[Candidate]:
    """Reciprocal-rank fusion; a missing rank counts as one past the worst."""
    worst = len(candidates) + 1
    fused: list[Candidate] = []
    for cand in candidates:
        lex = cand.lexical_rank if cand.lexical_rank is not None else worst
        emb = cand.embedding_rank if cand.embedding_rank is not None else worst
        score = 1.0 / (rrf_constant + lex) + 1.0 / (rrf_constant + emb)
        fused.append(replace(cand, fused_score=score))
    fused.sort(key=lambda c: (-c.fused_score, c.entry.id))
    return fused


def retrieve(
    query: RetrievalQuery,
    index: SearchIndex,
    embed_query: Callable[[str], EmbeddingVector] | None = None,
    rrf_constant: int = DEFAULT_RRF_CONSTANT,
    snippet_chars: int = 2000,
) -> EvidenceSet:
    """Full pipeline: embed, coarse union, fuse, top-k, dedupe by entry id."""
    flags: list[str] = []
    query_vector: EmbeddingVector | None = None
    if embed_query is not None:
        try:
            query_vector = embed_query(query.text)
        except Exception:
            flags.append("embedding_failed")
    candidates, coarse_flags = coarse_retrieve(query, index, query_vector)
    flags.extend(f for f in coarse_flags if f not in flags)
    ranked = rerank(candidates, rrf_constant)
    items: list[EvidenceItem] = []
    seen: set[str] = set()
    for cand in ranked:
        if len(items) >= query.k:
            break
        entry = cand.entry
        if entry.id in seen:
            continue
        seen.add(entry.id)
        text = entry.value
        if len(text) > snippet_chars:
            text = text[:snippet_chars] + " ..."
        items.append(
            EvidenceItem(
                ref=entry.id,
                level=int(entry.level),
                score=cand.fused_score,
                text=text,
                title=entry.key,
            )
        )
    return EvidenceSet(items=tuple(items), flags=tuple(flags))
