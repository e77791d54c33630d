"""Level routing across the knowledge stores and the web provider.

Level 1 is the curated procedure base, level 2 the internal document bases,
level 3 the web provider, level 4 the model's own knowledge. Level 4 holds
no storage; asking it for retrieval is an error by construction.
"""

from __future__ import annotations

import threading
from typing import Sequence

from opsassist.config import RetrievalConfig
from opsassist.errors import Level4Requested, ValidationFailed
from opsassist.kb.retrieval import SearchIndex, retrieve
from opsassist.kb.store import KnowledgeStore
from opsassist.kb.types import EvidenceItem, EvidenceSet, Level, RetrievalQuery
from opsassist.kb.web import WebSearchProvider, web_search
from opsassist.llm.providers import Embedder


class KnowledgeHierarchy:
    def __init__(
        self,
        sop_store: KnowledgeStore | None,
        internal_stores: Sequence[KnowledgeStore] = (),
        web_provider: WebSearchProvider | None = None,
        *,
        embedder: Embedder | None = None,
        retrieval: RetrievalConfig | None = None,
    ):
        if sop_store is not None and sop_store.level != Level.SOP:
            raise ValidationFailed(["first store must be the level-1 procedure base"])
        for store in internal_stores:
            if store.level != Level.INTERNAL:
                raise ValidationFailed([f"store {store.base_id} is not a level-2 base"])
        self.sop_store = sop_store
        self.internal_stores = tuple(internal_stores)
        self.web_provider = web_provider
        self._embedder = embedder
        self._retrieval = retrieval or RetrievalConfig()
        self._disabled: set[Level] = set()
        self._index_cache: dict[tuple, SearchIndex] = {}
        self._lock = threading.Lock()

    # -------------------------------------------------------------- toggles

    def disable_level(self, level: Level) -> None:
        level = Level(level)
        if level == Level.MODEL:
            raise ValidationFailed(["level 4 has no storage to disable"])
        self._disabled.add(level)

    def enable_level(self, level: Level) -> None:
        self._disabled.discard(Level(level))

    def is_disabled(self, level: Level) -> bool:
        return Level(level) in self._disabled

    # ------------------------------------------------------------- topology

    def _stores_for(self, level: Level, flat: bool) -> list[KnowledgeStore]:
        stores: list[KnowledgeStore] = []
        if flat:
            # pooled store levels collapse into a single searchable pool
            if self.sop_store is not None and Level.SOP not in self._disabled:
                stores.append(self.sop_store)
            if Level.INTERNAL not in self._disabled:
                stores.extend(self.internal_stores)
        elif level == Level.SOP and self.sop_store is not None:
            stores.append(self.sop_store)
        elif level == Level.INTERNAL:
            stores.extend(self.internal_stores)
        return stores

    def storage_levels(self, flat: bool = False) -> list[int]:
        """Levels that can currently serve a retrieval, in descent order."""
        levels: list[int] = []
        if flat:
            if self._stores_for(Level.SOP, flat=True):
                levels.append(1)
        else:
            if self.sop_store is not None and Level.SOP not in self._disabled:
                levels.append(1)
            if self.internal_stores and Level.INTERNAL not in self._disabled:
                levels.append(2)
        if self.web_provider is not None and Level.WEB not in self._disabled:
            levels.append(3)
        return levels

    def describe_levels(self, flat: bool = False) -> list[tuple[int, str]]:
        """(level, description) pairs for prompt rendering."""
        out: list[tuple[int, str]] = []
        for level in self.storage_levels(flat):
            if level == 3:
                out.append((3, "public web search"))
            else:
                stores = self._stores_for(Level(level), flat)
                out.append((level, "; ".join(s.description for s in stores)))
        return out

    # ------------------------------------------------------------ retrieval

    def _index_for(self, level: Level, flat: bool) -> SearchIndex:
        stores = self._stores_for(level, flat)
        key = (
            "flat" if flat else int(level),
            tuple((s.base_id, s.version) for s in stores),
        )
        with self._lock:
            index = self._index_cache.get(key)
            if index is None:
                entries = []
                vectors = [] if self._embedder is not None else None
                for store in stores:
                    entries.extend(store.entries())
                    if vectors is not None:
                        svecs = store.vectors()
                        if svecs is None:
                            vectors = None
                        else:
                            vectors.extend(svecs)
                index = SearchIndex.build(entries, vectors)
                self._index_cache[key] = index
        return index

    def _embed_query(self, text: str):
        if self._embedder is None:
            return None
        return lambda q: self._embedder.embed([q])[0]

    def retrieve(self, query: RetrievalQuery, *, flat: bool = False) -> EvidenceSet:
        level = Level(query.level)
        if level == Level.MODEL:
            raise Level4Requested(
                "level 4 is the model's own knowledge; answer from it instead of retrieving"
            )
        if level in self._disabled:
            return EvidenceSet(items=(), flags=("level_disabled",))
        if level == Level.WEB:
            results, flags = web_search(
                self.web_provider,
                query.text,
                max_results=min(query.k, self._retrieval.web_max_results),
                min_chars=self._retrieval.web_min_chars,
            )
            items = tuple(
                EvidenceItem(
                    ref=result.url,
                    level=3,
                    score=1.0 / rank,
                    text=result.text[: self._retrieval.snippet_chars],
                    title=result.title,
                )
                for rank, result in enumerate(results, start=1)
            )
            return EvidenceSet(items=items, flags=flags)
        index = self._index_for(level, flat)
        if not index.entries:
            return EvidenceSet(items=(), flags=("no_entries",))
        return retrieve(
            query,
            index,
            embed_query=self._embed_query(query.text),
            rrf_constant=self._retrieval.rrf_constant,
            snippet_chars=self._retrieval.snippet_chars,
        )
