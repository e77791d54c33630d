"""Chat pipeline stages: intake screen, field extraction, routing, quick answers."""

from __future__ import annotations

import json

from opsassist.intents import IntentRecord
from opsassist.llm.gateway import CallLog, LLMGateway
from opsassist.llm.providers import HashingEmbedder, Rule, ScriptedProvider
from opsassist.pipeline.stages import (
    AgentRegistry,
    AgentSpec,
    classify_intent,
    extract_fields,
    quick_answer,
)
from opsassist.tickets.repo import CaseRepository, ResolvedCase


def _gateway(rules):
    provider = ScriptedProvider(rules, provider_id="default")
    return LLMGateway({"default": provider}, HashingEmbedder(32))


def _intent(text, request_type="consultation", keywords=()):
    return IntentRecord(
        request_type=request_type, clarified_text=text, keywords=tuple(keywords)
    )


class _FlakyEmbedder(HashingEmbedder):
    """Embeds fine at registry build time, then fails on demand."""

    def __init__(self):
        super().__init__(32)
        self.fail = False

    def embed(self, texts):
        if self.fail:
            raise RuntimeError("embedder down")
        return super().embed(texts)


def test_classify_intent_in_scope():
    reply = '{"in_scope": true, "request_type": "consultation"}'
    gateway = _gateway([Rule(tag="intent", contains="", response=reply)])
    assert classify_intent(gateway, "how do shuffles work") == (
        True,
        "consultation",
        (),
    )


def test_classify_intent_out_of_scope():
    reply = '{"in_scope": false}'
    gateway = _gateway([Rule(tag="intent", contains="", response=reply)])
    assert classify_intent(gateway, "anyone up for lunch?") == (False, "", ())


def test_classify_intent_fails_open_on_malformed_reply():
    gateway = _gateway([Rule(tag="intent", contains="", response="zzz?")])
    in_scope, request_type, flags = classify_intent(gateway, "something broke")
    assert in_scope is True
    assert request_type == "troubleshooting"
    assert flags == ("intent_malformed",)


def test_classify_intent_repairs_bad_request_type():
    gateway = _gateway(
        [
            Rule(
                tag="intent",
                contains="was not valid",
                response='{"in_scope": true, "request_type": "troubleshooting"}',
            ),
            Rule(
                tag="intent",
                contains="",
                response='{"in_scope": true, "request_type": "banter"}',
            ),
        ]
    )
    log = CallLog()
    result = classify_intent(gateway, "the job failed", log=log)
    assert result == (True, "troubleshooting", ())
    assert log.count("intent") == 2


def test_extract_fields_parses_reply():
    reply = json.dumps(
        {
            "fields": {"symptom": "task fails nightly", "task_id": "  ", "junk": ""},
            "keywords": ["task failure diagnosis", " "],
        }
    )
    gateway = _gateway([Rule(tag="clarify", contains="", response=reply)])
    fields, keywords, flags = extract_fields(
        gateway, "troubleshooting", "user: my task fails", ["symptom", "task_id"]
    )
    assert fields == {"symptom": "task fails nightly"}
    assert keywords == ("task failure diagnosis",)
    assert flags == ()


def test_extract_fields_degrades_on_malformed_reply():
    gateway = _gateway([Rule(tag="clarify", contains="", response="not json")])
    fields, keywords, flags = extract_fields(
        gateway, "troubleshooting", "user: hm", ["symptom"]
    )
    assert fields == {}
    assert keywords == ()
    assert flags == ("clarify_malformed",)


def test_agent_spec_needs_keywords():
    import pytest

    with pytest.raises(ValueError):
        AgentSpec(name="idle", keywords=())


def test_registry_routes_matching_keywords():
    embedder = HashingEmbedder(32)
    registry = AgentRegistry(
        [AgentSpec(name="spark_agent", keywords=("task failure diagnosis",))], embedder
    )
    decision = registry.route(
        _intent("task fails", keywords=["task failure diagnosis"]), threshold=0.75
    )
    assert decision.target == "spark_agent"
    assert decision.matched_keyword == "task failure diagnosis"
    assert decision.best_similarity >= 0.99


def test_registry_defaults_to_general_below_threshold():
    embedder = HashingEmbedder(32)
    registry = AgentRegistry(
        [AgentSpec(name="spark_agent", keywords=("task failure diagnosis",))], embedder
    )
    decision = registry.route(
        _intent("completely unrelated gardening question"), threshold=0.75
    )
    assert decision.target == "general"
    assert decision.best_similarity >= 0.0


def test_registry_without_agents_routes_general():
    registry = AgentRegistry([], HashingEmbedder(32))
    decision = registry.route(_intent("anything"), threshold=0.75)
    assert decision.target == "general"
    assert decision.best_similarity == 0.0


def test_registry_degrades_when_embedding_fails():
    embedder = _FlakyEmbedder()
    registry = AgentRegistry(
        [AgentSpec(name="spark_agent", keywords=("task failure",))], embedder
    )
    embedder.fail = True
    decision = registry.route(_intent("task failure"), threshold=0.75)
    assert decision.target == "general"
    assert decision.flags == ("routing_embedding_failed",)


def test_quick_answer_uses_similar_resolved_case():
    repo = CaseRepository(
        [
            ResolvedCase(
                ticket_id="t-9001",
                summary="how do I enable dynamic partition inserts in hive",
                resolution="set the two dynamic partition options before the insert",
            )
        ],
        HashingEmbedder(32),
    )
    gateway = _gateway([])
    text, citations, stage = quick_answer(
        gateway,
        repo,
        _intent("how do I enable dynamic partition inserts in hive"),
        threshold=0.85,
    )
    assert text is not None
    assert text.startswith("A very similar resolved case was found (ticket t-9001).")
    assert "Resolution: set the two dynamic partition options" in text
    assert citations == ("t-9001",)
    assert stage["used"] is True
    assert stage["source"] == "case"
    assert stage["best_case"] == "t-9001"
    assert stage["similarity"] >= 0.85


def test_quick_answer_direct_path_for_simple_requests():
    gateway = _gateway(
        [
            Rule(tag="simplicity", contains="", response='{"simple": true}'),
            Rule(tag="quick", contains="", response="A shuffle moves rows between workers."),
        ]
    )
    text, citations, stage = quick_answer(
        gateway, None, _intent("what is a shuffle"), threshold=0.85
    )
    assert text == "A shuffle moves rows between workers."
    assert citations == ()
    assert stage["used"] is True
    assert stage["source"] == "direct"


def test_quick_answer_declines_non_simple_requests():
    gateway = _gateway([Rule(tag="simplicity", contains="", response='{"simple": false}')])
    text, citations, stage = quick_answer(
        gateway, None, _intent("why does my specific job fail"), threshold=0.85
    )
    assert text is None
    assert stage["used"] is False
    assert stage["source"] is None


def test_quick_answer_declines_when_probe_is_malformed():
    gateway = _gateway([Rule(tag="simplicity", contains="", response="shrug")])
    text, _, stage = quick_answer(gateway, None, _intent("hmm"), threshold=0.85)
    assert text is None
    assert stage["used"] is False
