"""Level routing, toggles, flat pooling, and index cache invalidation."""

from __future__ import annotations

import pytest

from opsassist.errors import Level4Requested, ValidationFailed
from opsassist.kb.hierarchy import KnowledgeHierarchy
from opsassist.kb.sop import (
    InvestigationStep,
    Observation,
    ResolutionStep,
    RootCauseBranch,
    SOPRecord,
)
from opsassist.kb.store import KnowledgeStore
from opsassist.kb.types import Level, RetrievalQuery
from opsassist.kb.web import StaticWebProvider, WebResult
from opsassist.llm.providers import HashingEmbedder


def _sop(problem):
    return SOPRecord(
        problem_desc=problem,
        branches=(
            RootCauseBranch(
                root_cause=f"cause of {problem}",
                investigation_steps=(
                    InvestigationStep(1, "cluster", "inspect", (Observation("seen", "confirmed"),)),
                ),
                resolution_steps=(ResolutionStep(1, "apply fix"),),
            ),
        ),
    )


@pytest.fixture()
def hierarchy(tmp_path):
    embedder = HashingEmbedder(16)
    sop_store = KnowledgeStore(
        tmp_path / "sop.jsonl",
        "sop",
        Level.SOP,
        embedder,
        description="validated operating procedures",
        id_prefix="sop",
    )
    sop_store.upsert_sop(_sop("numberformatexception during raw data import"))
    sop_store.upsert_sop(_sop("executor out of memory during shuffle"))
    wiki = KnowledgeStore(
        tmp_path / "wiki.jsonl", "wiki", Level.INTERNAL, embedder, description="internal documents: wiki"
    )
    wiki.add_entry("executor memory tuning notes", "set spark.executor.memory higher")
    web = StaticWebProvider(
        [
            WebResult(
                url="https://jvm.example.com/gc",
                title="gc overhead limit exceeded",
                text="long explanation of the gc overhead limit exceeded error " * 2,
            )
        ]
    )
    return KnowledgeHierarchy(
        sop_store, [wiki], web, embedder=embedder
    )


def _query(text, level, k=3):
    return RetrievalQuery(text=text, level=level, k=k)


def test_storage_levels_hierarchical(hierarchy):
    assert hierarchy.storage_levels() == [1, 2, 3]


def test_storage_levels_flat_pools_stores(hierarchy):
    assert hierarchy.storage_levels(flat=True) == [1, 3]
    described = dict(hierarchy.describe_levels(flat=True))
    assert described[1] == "validated operating procedures; internal documents: wiki"


def test_describe_levels_hierarchical(hierarchy):
    rows = hierarchy.describe_levels()
    assert rows[0] == (1, "validated operating procedures")
    assert rows[1] == (2, "internal documents: wiki")
    assert rows[2] == (3, "public web search")


def test_disable_level_hides_it(hierarchy):
    hierarchy.disable_level(Level.SOP)
    assert hierarchy.storage_levels() == [2, 3]
    assert hierarchy.is_disabled(Level.SOP)
    assert dict(hierarchy.describe_levels()).get(1) is None
    hierarchy.enable_level(Level.SOP)
    assert hierarchy.storage_levels() == [1, 2, 3]


def test_disable_level_four_is_rejected(hierarchy):
    with pytest.raises(ValidationFailed):
        hierarchy.disable_level(Level.MODEL)


def test_retrieve_level_four_raises(hierarchy):
    with pytest.raises(Level4Requested):
        hierarchy.retrieve(_query("anything", Level.MODEL))


def test_retrieve_disabled_level_returns_flag(hierarchy):
    hierarchy.disable_level(Level.SOP)
    result = hierarchy.retrieve(_query("numberformatexception", Level.SOP))
    assert result.items == ()
    assert result.flags == ("level_disabled",)


def test_retrieve_level_one_finds_procedure(hierarchy):
    result = hierarchy.retrieve(
        _query("numberformatexception during raw data import", Level.SOP)
    )
    assert result.refs()[0] == "sop-0001"


def test_retrieve_level_two_searches_wiki_only(hierarchy):
    result = hierarchy.retrieve(_query("executor memory tuning notes", Level.INTERNAL))
    assert result.refs()[0] == "wiki-0001"
    assert all(item.level == 2 for item in result.items)


def test_flat_retrieval_pools_procedures_and_wiki(hierarchy):
    sop_hit = hierarchy.retrieve(
        _query("numberformatexception during raw data import", Level.SOP), flat=True
    )
    assert sop_hit.refs()[0] == "sop-0001"
    wiki_hit = hierarchy.retrieve(
        _query("executor memory tuning notes", Level.SOP), flat=True
    )
    assert wiki_hit.refs()[0] == "wiki-0001"


def test_web_results_use_url_refs_and_rank_scores(hierarchy):
    result = hierarchy.retrieve(_query("gc overhead limit exceeded", Level.WEB))
    assert result.refs() == ("https://jvm.example.com/gc",)
    item = result.items[0]
    assert item.level == 3
    assert item.score == 1.0
    assert item.title == "gc overhead limit exceeded"


def test_missing_web_provider_degrades(tmp_path):
    embedder = HashingEmbedder(16)
    sop_store = KnowledgeStore(tmp_path / "sop.jsonl", "sop", Level.SOP, embedder)
    hierarchy = KnowledgeHierarchy(sop_store, [], None, embedder=embedder)
    # the empty procedure base still counts as storage; web does not
    assert hierarchy.storage_levels() == [1]
    result = hierarchy.retrieve(_query("anything", Level.WEB))
    assert result.flags == ("web_unavailable",)
    empty = hierarchy.retrieve(_query("anything", Level.SOP))
    assert empty.flags == ("no_entries",)


def test_store_writes_invalidate_index_cache(hierarchy):
    before = hierarchy.retrieve(_query("staging cleanup runbook details", Level.INTERNAL))
    assert "wiki-0002" not in before.refs()
    for store in hierarchy.internal_stores:
        store.add_entry("staging cleanup runbook details", "remove orphaned files nightly")
    after = hierarchy.retrieve(_query("staging cleanup runbook details", Level.INTERNAL))
    assert after.refs()[0] == "wiki-0002"


def test_level_slots_are_checked(tmp_path):
    sop_store = KnowledgeStore(tmp_path / "sop.jsonl", "sop", Level.SOP)
    wiki = KnowledgeStore(tmp_path / "wiki.jsonl", "wiki", Level.INTERNAL)
    with pytest.raises(ValidationFailed, match="level-1"):
        KnowledgeHierarchy(wiki, [], None)
    with pytest.raises(ValidationFailed, match="level-2"):
        KnowledgeHierarchy(None, [sop_store], None)
