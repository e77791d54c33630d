"""Structured-reply schema checks."""

from __future__ import annotations

import pytest

from opsassist.errors import SchemaViolation
from opsassist.llm.schema import SchemaDescriptor, check_record, parse_object

PLAN = SchemaDescriptor(
    name="plan",
    required=("action",),
    types={"action": str, "level": int, "ready": bool, "score": float},
    enums={"action": ("retrieve", "finish")},
)


def test_check_record_accepts_valid():
    assert check_record({"action": "retrieve", "level": 2}, PLAN) == []


def test_check_record_missing_and_empty_required():
    assert check_record({}, PLAN) == ["missing required field 'action'"]
    bare = SchemaDescriptor(name="bare", required=("action",))
    assert check_record({"action": "  "}, bare) == ["field 'action' is empty"]


def test_check_record_bool_is_not_int():
    problems = check_record({"action": "finish", "level": True}, PLAN)
    assert problems == ["field 'level' has wrong type bool"]


def test_check_record_int_is_acceptable_float():
    assert check_record({"action": "finish", "score": 2}, PLAN) == []


def test_check_record_enum_violation():
    problems = check_record({"action": "stop"}, PLAN)
    assert len(problems) == 1
    assert "must be one of" in problems[0]


def test_check_record_runs_validator_only_when_clean():
    calls = []

    def validator(record):
        calls.append(record)
        return ["cross-field problem"]

    schema = SchemaDescriptor(name="s", required=("a",), validator=validator)
    assert check_record({}, schema) == ["missing required field 'a'"]
    assert calls == []
    assert check_record({"a": "x"}, schema) == ["cross-field problem"]
    assert calls == [{"a": "x"}]


def test_describe_lists_requirements_and_enums():
    text = PLAN.describe()
    assert "required fields: action" in text
    assert "action must be one of: retrieve, finish" in text


def test_parse_object_accepts_prose_wrapped_json():
    record = parse_object('the plan: {"action": "finish"} done', PLAN)
    assert record == {"action": "finish"}


def test_parse_object_collects_all_problems():
    with pytest.raises(SchemaViolation) as err:
        parse_object('{"action": "stop", "level": "two"}', PLAN)
    assert len(err.value.problems) == 2


def test_parse_object_rejects_non_json():
    with pytest.raises(SchemaViolation):
        parse_object("no structure at all", PLAN)
