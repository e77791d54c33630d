"""Five-stage chat orchestration and the console twin path."""

from __future__ import annotations

import pytest

import opsassist.fixtures as fx
from opsassist.errors import UnknownSession
from opsassist.textutil import canonical_json


def test_empty_message_rejected(make_runtime):
    runtime = make_runtime()
    session = runtime.sessions.create()
    with pytest.raises(ValueError):
        runtime.pipeline.handle_chat_turn(session.id, "   ")


def test_unknown_session_rejected(make_runtime):
    runtime = make_runtime()
    with pytest.raises(UnknownSession):
        runtime.pipeline.handle_chat_turn("s-9999", "hello")


def test_out_of_scope_message_refused(make_runtime):
    runtime = make_runtime()
    result = fx.drive_chat_refusal(runtime)
    assert result.kind == "refusal"
    assert result.text == runtime.config.pipeline.refusal_text
    assert result.trace is None
    assert result.stages[0]["stage"] == "intent"
    assert result.stages[0]["in_scope"] is False


def test_clarify_then_answer_then_memory_follow_on(make_runtime):
    runtime = make_runtime()
    turns = fx.drive_chat_session(runtime)
    assert [t.kind for t in turns] == ["followup", "answer", "answer"]
    assert turns[0].followup_field == "error_log"
    assert turns[0].text == runtime.config.pipeline.followup_questions["error_log"]
    assert fx.GOLDEN_SOP_ID in turns[1].citations
    # the third turn reuses session memory instead of re-asking for the log
    assert turns[2].followup_field is None
    assert fx.GOLDEN_SOP_ID in turns[2].citations


def test_session_records_turn_history(make_runtime):
    runtime = make_runtime()
    session = runtime.sessions.create()
    runtime.pipeline.handle_chat_turn(session.id, fx.CHAT_NFE_T1)
    runtime.pipeline.handle_chat_turn(session.id, fx.CHAT_NFE_T2)
    roles = [turn["role"] for turn in session.turns]
    assert roles == ["user", "assistant", "user", "assistant"]
    assert session.turns[1]["kind"] == "followup"
    assert session.turns[3]["kind"] == "answer"
    assert session.memory["task_id"] == "task_12345"


def test_quick_case_answers_from_repository(make_runtime):
    runtime = make_runtime()
    result = fx.drive_chat_quick_case(runtime)
    assert result.kind == "answer"
    assert result.citations == ("t-9001",)
    assert result.text.startswith("A very similar resolved case was found")
    assert result.trace["engine"] is None


def test_simple_question_answered_directly(make_runtime):
    runtime = make_runtime()
    result = fx.drive_chat_simple_direct(runtime)
    assert result.text == fx.SIMPLE_DIRECT_REPLY
    assert result.trace["engine"] is None
    quick = next(s for s in result.stages if s["stage"] == "quick_answer")
    assert quick["source"] == "direct"


def test_consultation_runs_the_engine(make_runtime):
    runtime = make_runtime()
    result = fx.drive_chat_consult_engine(runtime)
    assert result.kind == "answer"
    assert result.trace["engine"] is not None
    assert "parquet" in result.text


def test_followups_exhausted_still_answers(make_runtime):
    runtime = make_runtime()
    turns = fx.drive_chat_exhausted(runtime)
    assert [t.kind for t in turns] == ["followup", "followup", "followup", "answer"]
    clarify = next(s for s in turns[-1].stages if s["stage"] == "clarify")
    assert "followups_exhausted" in clarify["flags"]
    assert turns[-1].answer is not None
    assert "incomplete_intent" in turns[-1].answer.flags


def test_unreadable_intent_screen_fails_open(make_runtime):
    runtime = make_runtime()
    result = fx.drive_chat_intent_malformed(runtime)
    assert result.kind == "answer"
    intent_stage = result.stages[0]
    assert "intent_malformed" in intent_stage["flags"]
    assert intent_stage["request_type"] == "troubleshooting"


def test_chat_and_console_produce_identical_engine_traces(make_runtime):
    chat_runtime = make_runtime()
    turns = fx.drive_chat_session(chat_runtime)
    console_runtime = make_runtime()
    console = fx.drive_chat_console_twin(console_runtime)
    # the clarification turns spend budget before the engine starts, so the
    # budget snapshot differs; the investigation itself must match exactly
    chat_engine = dict(turns[1].trace["engine"])
    console_engine = dict(console.trace["engine"])
    chat_engine.pop("budget")
    console_engine.pop("budget")
    assert canonical_json(chat_engine) == canonical_json(console_engine)
    assert turns[1].trace["channel"] == "chat"
    assert console.trace["channel"] == "console"


def test_console_envelope_shape(make_runtime):
    runtime = make_runtime()
    result = runtime.pipeline.diagnose(fx.diag_case("golden").context())
    envelope = result.envelope("console")
    assert envelope["channel"] == "console"
    assert envelope["reply"] == result.text
    assert [s["stage"] for s in envelope["stages"][:2]] == ["intent", "route"]
    assert envelope["answer"]["citations"] == list(result.citations)
