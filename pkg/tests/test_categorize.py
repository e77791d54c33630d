"""Structured ticket labeling through the gateway."""

import json

import pytest

from opsassist.config import DEFAULT_ACTION_VOCABULARY
from opsassist.errors import MalformedOutput
from opsassist.llm.gateway import CallLog, LLMGateway
from opsassist.llm.providers import HashingEmbedder, Rule, ScriptedProvider
from opsassist.tickets.categorize import categorize_ticket
from opsassist.tickets.types import Ticket

GOOD_REPLY = json.dumps(
    {
        "system": "reporting",
        "module": "export",
        "request_type": "troubleshooting",
        "summary": "Export job failed on a malformed numeric column.",
        "keywords": ["export", "numeric"],
        "final_actions": ["schema_change"],
    }
)


def _gateway(rules):
    provider = ScriptedProvider(rules, provider_id="default")
    return LLMGateway({"default": provider}, HashingEmbedder())


def _ticket(outcome="resolved by schema change"):
    return Ticket(
        id="t-0001",
        turns=(
            ("user", "the export job fails every night"),
            ("engineer", "the numeric column had stray line breaks; fixed"),
        ),
        outcome=outcome,
    )


def test_labels_parsed_from_valid_reply():
    gateway = _gateway([Rule(contains="", response=GOOD_REPLY, tag="labels")])
    labels = categorize_ticket(gateway, _ticket(), DEFAULT_ACTION_VOCABULARY)
    assert labels.system == "reporting"
    assert labels.module == "export"
    assert labels.request_type == "troubleshooting"
    assert labels.keywords == ("export", "numeric")
    assert labels.final_actions == ("schema_change",)
    assert labels.flags == ()


def test_prompt_carries_conversation_vocabulary_and_outcome():
    seen = []

    def reply(req):
        seen.append(req.messages[-1].text)
        return GOOD_REPLY

    gateway = _gateway([Rule(contains="", response=reply)])
    categorize_ticket(gateway, _ticket(), DEFAULT_ACTION_VOCABULARY)
    prompt = seen[0]
    assert "Ticket id: t-0001" in prompt
    assert "user: the export job fails every night" in prompt
    assert "Recorded outcome: resolved by schema change" in prompt
    assert "closed vocabulary" in prompt
    assert "schema_change" in prompt


def test_outcome_line_omitted_when_absent():
    seen = []

    def reply(req):
        seen.append(req.messages[-1].text)
        return GOOD_REPLY

    gateway = _gateway([Rule(contains="", response=reply)])
    categorize_ticket(gateway, _ticket(outcome=""), DEFAULT_ACTION_VOCABULARY)
    assert "Recorded outcome" not in seen[0]


def test_unknown_actions_dropped_and_flagged():
    reply = json.dumps(
        {
            "system": "reporting",
            "module": "export",
            "request_type": "troubleshooting",
            "summary": "Export job failed.",
            "final_actions": ["schema_change", "percussive_maintenance"],
        }
    )
    gateway = _gateway([Rule(contains="", response=reply)])
    labels = categorize_ticket(gateway, _ticket(), DEFAULT_ACTION_VOCABULARY)
    assert labels.final_actions == ("schema_change",)
    assert labels.flags == ("unknown_actions_dropped",)


def test_missing_optional_keys_default_to_empty():
    reply = json.dumps(
        {
            "system": "reporting",
            "module": "export",
            "request_type": "consultation",
            "summary": "Question about export formats.",
        }
    )
    gateway = _gateway([Rule(contains="", response=reply)])
    labels = categorize_ticket(gateway, _ticket(), DEFAULT_ACTION_VOCABULARY)
    assert labels.keywords == ()
    assert labels.final_actions == ()


def test_invalid_reply_is_repaired_once():
    bad = json.dumps({"system": "reporting", "module": "export"})
    gateway = _gateway(
        [
            Rule(contains="was not valid", response=GOOD_REPLY),
            Rule(contains="", response=bad),
        ]
    )
    log = CallLog()
    labels = categorize_ticket(
        gateway, _ticket(), DEFAULT_ACTION_VOCABULARY, log=log
    )
    assert labels.summary.startswith("Export job failed")
    assert log.count("labels") == 2


def test_irreparable_reply_raises():
    gateway = _gateway([Rule(contains="", response="not structured at all")])
    with pytest.raises(MalformedOutput):
        categorize_ticket(gateway, _ticket(), DEFAULT_ACTION_VOCABULARY)
