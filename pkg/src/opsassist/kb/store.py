"""Durable entry storage: one record file per base plus an embedding sidecar.

Records live in a line-delimited JSON file; key embeddings are cached in a
sidecar keyed by entry id and embedder version so a model swap forces a
clean recompute without touching the records.
"""

from __future__ import annotations

import json
import os
import tempfile
import threading
from pathlib import Path
from typing import Iterable, Sequence

from opsassist.errors import UnknownReplaceTarget, ValidationFailed
from opsassist.kb.retrieval import SearchIndex
from opsassist.kb.sop import SOPRecord, sop_from_dict, sop_to_dict, validate_sop
from opsassist.kb.types import KnowledgeEntry, Level, Provenance
from opsassist.llm.providers import Embedder
from opsassist.llm.types import EmbeddingVector
from opsassist.textutil import canonical_json


def _atomic_write(path: Path, lines: Iterable[str]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=str(path.parent), suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            for line in lines:
                fh.write(line)
                fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class KnowledgeStore:
    """Entries for one base at one level, with cached key embeddings."""

    def __init__(
        self,
        path: str | Path,
        base_id: str,
        level: Level,
        embedder: Embedder | None = None,
        description: str = "",
        id_prefix: str | None = None,
    ):
        if level not in (Level.SOP, Level.INTERNAL):
            raise ValueError("stores exist at level 1 or 2 only")
        self.path = Path(path)
        self.base_id = base_id
        self.level = Level(level)
        self.description = description or base_id
        self._embedder = embedder
        self._prefix = id_prefix or base_id
        self._lock = threading.Lock()
        self._entries: list[KnowledgeEntry] = []
        self._vectors: dict[str, EmbeddingVector] = {}
        self._version = 0
        self._load()

    # ------------------------------------------------------------- plumbing

    @property
    def _sidecar(self) -> Path:
        return self.path.with_suffix(self.path.suffix + ".emb")

    def _load(self) -> None:
        self._entries = []
        if self.path.exists():
            with open(self.path, "r", encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    entry = KnowledgeEntry.from_dict(json.loads(line))
                    if entry.level != self.level:
                        raise ValidationFailed(
                            [f"entry {entry.id} has level {int(entry.level)}, store is {int(self.level)}"]
                        )
                    if self.level == Level.SOP:
                        # level-1 values must parse as valid procedures
                        sop_from_dict(json.loads(entry.value))
                    self._entries.append(entry)
        ids = [e.id for e in self._entries]
        if len(ids) != len(set(ids)):
            raise ValidationFailed([f"duplicate entry ids in {self.path}"])
        self._vectors = {}
        if self._embedder is not None:
            wanted = self._embedder.version
            if self._sidecar.exists():
                with open(self._sidecar, "r", encoding="utf-8") as fh:
                    for line in fh:
                        line = line.strip()
                        if not line:
                            continue
                        row = json.loads(line)
                        if row.get("version") == wanted:
                            self._vectors[row["id"]] = EmbeddingVector(
                                tuple(float(v) for v in row["values"])
                            )
            self._embed_missing()
        self._version += 1

    def _embed_missing(self) -> None:
        assert self._embedder is not None
        missing = [e for e in self._entries if e.id not in self._vectors]
        if not missing:
            return
        vectors = self._embedder.embed([e.key for e in missing])
        rows = []
        for entry, vec in zip(missing, vectors):
            self._vectors[entry.id] = vec
            rows.append(
                json.dumps(
                    {
                        "id": entry.id,
                        "version": self._embedder.version,
                        "values": list(vec.values),
                    }
                )
            )
        self._sidecar.parent.mkdir(parents=True, exist_ok=True)
        with open(self._sidecar, "a", encoding="utf-8") as fh:
            for row in rows:
                fh.write(row)
                fh.write("\n")

    def _persist(self) -> None:
        _atomic_write(self.path, (json.dumps(e.to_dict(), ensure_ascii=False) for e in self._entries))
        if self._embedder is not None:
            self._embed_missing()
        self._version += 1

    # -------------------------------------------------------------- reading

    @property
    def version(self) -> int:
        return self._version

    def entries(self) -> tuple[KnowledgeEntry, ...]:
        return tuple(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, entry_id: str) -> KnowledgeEntry | None:
        for entry in self._entries:
            if entry.id == entry_id:
                return entry
        return None

    def vectors(self) -> list[EmbeddingVector] | None:
        if self._embedder is None:
            return None
        return [self._vectors[e.id] for e in self._entries]

    def build_index(self) -> SearchIndex:
        return SearchIndex.build(self._entries, self.vectors())

    # -------------------------------------------------------------- writing

    def next_id(self) -> str:
        with self._lock:
            return self._next_id_locked()

    def _next_id_locked(self) -> str:
        taken = {e.id for e in self._entries}
        n = len(self._entries) + 1
        while f"{self._prefix}-{n:04d}" in taken:
            n += 1
        return f"{self._prefix}-{n:04d}"

    def add_entry(
        self,
        key: str,
        value: str,
        provenance: Sequence[Provenance] = (),
        entry_id: str | None = None,
    ) -> KnowledgeEntry:
        with self._lock:
            entry = KnowledgeEntry(
                id=entry_id or self._next_id_locked(),
                level=self.level,
                base_id=self.base_id,
                key=key,
                value=value,
                provenance=tuple(provenance),
            )
            if any(e.id == entry.id for e in self._entries):
                raise ValidationFailed([f"entry id {entry.id} already exists"])
            self._entries.append(entry)
            self._persist()
            return entry

    def replace_entry(self, old_id: str, key: str, value: str, provenance: Sequence[Provenance]) -> KnowledgeEntry:
        with self._lock:
            for i, existing in enumerate(self._entries):
                if existing.id == old_id:
                    entry = KnowledgeEntry(
                        id=old_id,
                        level=self.level,
                        base_id=self.base_id,
                        key=key,
                        value=value,
                        provenance=tuple(provenance),
                    )
                    self._entries[i] = entry
                    self._vectors.pop(old_id, None)
                    self._persist()
                    return entry
            raise UnknownReplaceTarget(f"no entry {old_id!r} in base {self.base_id!r}")

    # ------------------------------------------------------------ SOP layer

    def sop_record(self, entry_id: str) -> SOPRecord:
        entry = self.get(entry_id)
        if entry is None:
            raise UnknownReplaceTarget(f"no entry {entry_id!r} in base {self.base_id!r}")
        return sop_from_dict(json.loads(entry.value))

    def upsert_sop(self, record: SOPRecord, replace_id: str | None = None) -> KnowledgeEntry:
        """Add a procedure entry, or atomically replace an existing one."""
        if self.level != Level.SOP:
            raise ValidationFailed(["procedures can only be stored at level 1"])
        problems = validate_sop(record)
        if problems:
            raise ValidationFailed(problems)
        value = canonical_json(sop_to_dict(record))
        if replace_id is None:
            return self.add_entry(
                key=record.problem_desc, value=value, provenance=record.provenance
            )
        return self.replace_entry(
            replace_id, key=record.problem_desc, value=value, provenance=record.provenance
        )
