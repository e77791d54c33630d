"""Store persistence, id allocation, and the embedding sidecar."""

from __future__ import annotations

import json

import pytest

from opsassist.errors import UnknownReplaceTarget, ValidationFailed
from opsassist.kb.sop import (
    InvestigationStep,
    Observation,
    ResolutionStep,
    RootCauseBranch,
    SOPRecord,
)
from opsassist.kb.store import KnowledgeStore
from opsassist.kb.types import Level, Provenance
from opsassist.llm.providers import HashingEmbedder


class CountingEmbedder:
    """Hashing embedder that counts embed calls, for cache assertions."""

    def __init__(self, dimension=16, version=None):
        self._inner = HashingEmbedder(dimension)
        self.dimension = dimension
        self.version = version or self._inner.version
        self.calls = 0

    def embed(self, texts):
        self.calls += 1
        return self._inner.embed(texts)


def _sop(problem="quota exceeded on staging"):
    return SOPRecord(
        problem_desc=problem,
        branches=(
            RootCauseBranch(
                root_cause="orphaned temporary files",
                investigation_steps=(
                    InvestigationStep(
                        1, "staging volume", "check usage", (Observation("full", "confirmed"),)
                    ),
                ),
                resolution_steps=(ResolutionStep(1, "purge temp files"),),
            ),
        ),
        provenance=(Provenance(kind="manual"),),
    )


def _store(tmp_path, **kwargs):
    defaults = dict(
        path=tmp_path / "wiki.jsonl",
        base_id="wiki",
        level=Level.INTERNAL,
        embedder=HashingEmbedder(16),
    )
    defaults.update(kwargs)
    return KnowledgeStore(**defaults)


def test_add_entry_allocates_sequential_ids(tmp_path):
    store = _store(tmp_path)
    first = store.add_entry("key one", "value one")
    second = store.add_entry("key two", "value two")
    assert (first.id, second.id) == ("wiki-0001", "wiki-0002")
    assert len(store) == 2


def test_add_entry_rejects_duplicate_id(tmp_path):
    store = _store(tmp_path)
    store.add_entry("k", "v", entry_id="wiki-0009")
    with pytest.raises(ValidationFailed, match="already exists"):
        store.add_entry("k2", "v2", entry_id="wiki-0009")


def test_next_id_skips_taken_numbers(tmp_path):
    store = _store(tmp_path)
    store.add_entry("k", "v", entry_id="wiki-0001")
    store.add_entry("k2", "v2", entry_id="wiki-0002")
    assert store.next_id() == "wiki-0003"


def test_entries_persist_across_instances(tmp_path):
    store = _store(tmp_path)
    entry = store.add_entry("key", "value", provenance=(Provenance(kind="manual", ref="r"),))
    reloaded = _store(tmp_path)
    assert reloaded.entries() == (entry,)
    assert reloaded.get(entry.id) == entry
    assert reloaded.get("missing") is None


def test_sidecar_reused_without_recomputing(tmp_path):
    first = CountingEmbedder()
    store = _store(tmp_path, embedder=first)
    store.add_entry("key one", "value")
    store.add_entry("key two", "value")
    assert first.calls > 0

    second = CountingEmbedder()
    reloaded = _store(tmp_path, embedder=second)
    assert second.calls == 0
    assert reloaded.vectors() == store.vectors()


def test_version_change_forces_reembedding(tmp_path):
    store = _store(tmp_path, embedder=CountingEmbedder())
    store.add_entry("key one", "value")
    swapped = CountingEmbedder(version="hash-v2-d16")
    _store(tmp_path, embedder=swapped)
    assert swapped.calls == 1


def test_replace_entry_keeps_id_and_reembeds(tmp_path):
    embedder = CountingEmbedder()
    store = _store(tmp_path, embedder=embedder)
    entry = store.add_entry("old key", "old value")
    old_vec = store.vectors()[0]
    replaced = store.replace_entry(entry.id, "new key text", "new value", ())
    assert replaced.id == entry.id
    assert store.get(entry.id).key == "new key text"
    assert store.vectors()[0] != old_vec


def test_replace_entry_unknown_target(tmp_path):
    store = _store(tmp_path)
    with pytest.raises(UnknownReplaceTarget):
        store.replace_entry("wiki-9999", "k", "v", ())


def test_version_bumps_on_writes(tmp_path):
    store = _store(tmp_path)
    v0 = store.version
    store.add_entry("k", "v")
    assert store.version > v0


def test_load_rejects_wrong_level_entry(tmp_path):
    path = tmp_path / "wiki.jsonl"
    row = {
        "id": "wiki-0001",
        "level": 1,
        "base_id": "wiki",
        "key": "k",
        "value": "{}",
        "provenance": [],
    }
    path.write_text(json.dumps(row) + "\n")
    with pytest.raises(ValidationFailed, match="level"):
        _store(tmp_path)


def test_load_rejects_duplicate_ids(tmp_path):
    path = tmp_path / "wiki.jsonl"
    row = {
        "id": "wiki-0001",
        "level": 2,
        "base_id": "wiki",
        "key": "k",
        "value": "v",
        "provenance": [],
    }
    path.write_text(json.dumps(row) + "\n" + json.dumps(row) + "\n")
    with pytest.raises(ValidationFailed, match="duplicate"):
        _store(tmp_path)


def test_store_rejects_web_level():
    with pytest.raises(ValueError):
        KnowledgeStore("x.jsonl", "web", Level.WEB)


def test_upsert_sop_only_at_level_one(tmp_path):
    store = _store(tmp_path)
    with pytest.raises(ValidationFailed, match="level 1"):
        store.upsert_sop(_sop())


def test_upsert_sop_round_trips_and_replaces(tmp_path):
    store = KnowledgeStore(
        tmp_path / "sop.jsonl", "sop", Level.SOP, HashingEmbedder(16), id_prefix="sop"
    )
    entry = store.upsert_sop(_sop())
    assert entry.id == "sop-0001"
    assert entry.key == "quota exceeded on staging"
    assert store.sop_record(entry.id) == _sop()

    updated = _sop(problem="quota exceeded on staging volume")
    replaced = store.upsert_sop(updated, replace_id=entry.id)
    assert replaced.id == entry.id
    assert store.sop_record(entry.id).problem_desc == updated.problem_desc
    assert len(store) == 1


def test_upsert_sop_validates_record(tmp_path):
    store = KnowledgeStore(tmp_path / "sop.jsonl", "sop", Level.SOP)
    bad = SOPRecord(problem_desc="p", branches=())
    with pytest.raises(ValidationFailed):
        store.upsert_sop(bad)


def test_sop_level_values_validated_on_load(tmp_path):
    path = tmp_path / "sop.jsonl"
    row = {
        "id": "sop-0001",
        "level": 1,
        "base_id": "sop",
        "key": "k",
        "value": json.dumps({"problem_desc": "p", "content": []}),
        "provenance": [],
    }
    path.write_text(json.dumps(row) + "\n")
    with pytest.raises(ValidationFailed):
        KnowledgeStore(path, "sop", Level.SOP)
