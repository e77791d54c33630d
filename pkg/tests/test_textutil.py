"""Text helper behavior: whitespace, scrubbing, JSON extraction, truncation."""

from __future__ import annotations

import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from opsassist.textutil import (
    canonical_json,
    collapse_ws,
    extract_json_object,
    normalize_label,
    scrub_volatile,
    tokenize,
    trim_repeated_blocks,
    truncate_middle,
)


def test_collapse_ws_squeezes_runs_and_strips():
    assert collapse_ws("  a \t b\n\nc  ") == "a b c"
    assert collapse_ws("") == ""
    assert collapse_ws(" \n\t ") == ""


@given(st.text())
def test_collapse_ws_is_idempotent(text):
    once = collapse_ws(text)
    assert collapse_ws(once) == once


@given(st.text())
def test_collapse_ws_output_has_no_ws_runs(text):
    out = collapse_ws(text)
    assert "  " not in out
    assert "\n" not in out and "\t" not in out


def test_scrub_replaces_iso_timestamps():
    line = "started 2024-03-01T08:15:22Z and again 2024-03-01 08:15:22.123+02:00"
    assert scrub_volatile(line) == "started <timestamp> and again <timestamp>"


def test_scrub_replaces_uuids():
    line = "job 8f14e45f-ceea-4672-a2cf-5d9f0a1b2c3d failed"
    assert scrub_volatile(line) == "job <id> failed"


def test_scrub_keeps_placeholder_timestamps_and_task_ids():
    # letter placeholders are not volatile; neither are task ids
    line = 'For input string: "yyyy-mm-dd hh:mm:ss" in task_12345'
    assert scrub_volatile(line) == line


def test_tokenize_lowercases_and_keeps_underscores():
    assert tokenize("Task_70914 OOM-Killed twice!") == ["task_70914", "oom", "killed", "twice"]


def test_normalize_label_ignores_case_ws_and_trailing_period():
    a = normalize_label("The Data contains  unparsable characters.")
    b = normalize_label("the data contains unparsable characters")
    assert a == b


def test_canonical_json_sorts_keys_compactly():
    assert canonical_json({"b": 1, "a": [2, 3]}) == '{"a":[2,3],"b":1}'
    # non-ascii stays readable instead of escaped
    assert canonical_json({"k": "café"}) == '{"k":"café"}'


def test_extract_json_object_plain():
    assert extract_json_object('{"a": 1}') == {"a": 1}


def test_extract_json_object_with_prose_and_fence():
    text = 'Sure, here you go:\n```json\n{"a": 1}\n```\nanything else?'
    assert extract_json_object(text) == {"a": 1}


def test_extract_json_object_brace_scan_handles_strings():
    text = 'prefix {"msg": "a } inside", "n": 2} suffix'
    assert extract_json_object(text) == {"msg": "a } inside", "n": 2}


def test_extract_json_object_picks_first_object():
    text = 'x {"a": 1} y {"b": 2}'
    assert extract_json_object(text) == {"a": 1}


def test_extract_json_object_rejects_non_objects():
    with pytest.raises(ValueError):
        extract_json_object("[1, 2, 3]")
    with pytest.raises(ValueError):
        extract_json_object("no json here")


@given(st.dictionaries(st.text(min_size=1), st.integers() | st.text(), max_size=5))
def test_extract_json_object_round_trips_any_object(obj):
    wrapped = "noise before " + json.dumps(obj) + " noise after"
    assert extract_json_object(wrapped) == obj


def test_trim_repeated_blocks_drops_pasted_twice_traces():
    block = "Traceback\n  at foo\n  at bar"
    text = block + "\n" + block
    assert trim_repeated_blocks(text) == block


def test_trim_repeated_blocks_keeps_distinct_lines():
    text = "a\nb\nc"
    assert trim_repeated_blocks(text) == text


def test_truncate_middle_short_text_untouched():
    assert truncate_middle("hello", 10) == "hello"


def test_truncate_middle_keeps_head_and_tail():
    text = "h" * 100 + "t" * 50
    out = truncate_middle(text, 30)
    assert out.startswith("h" * 20)
    assert out.endswith("t" * 10)
    assert "[120 chars omitted]" in out


@given(st.text(min_size=0, max_size=400), st.integers(min_value=3, max_value=50))
def test_truncate_middle_never_loses_edges(text, cap):
    out = truncate_middle(text, cap)
    if len(text) <= cap:
        assert out == text
    else:
        head = cap * 2 // 3
        assert out.startswith(text[:head])
        assert out.endswith(text[len(text) - (cap - head):])
