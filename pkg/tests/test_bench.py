"""Benchmark harness: case loading, aggregation, and scripted mode runs."""

from __future__ import annotations

import json
import time
from types import SimpleNamespace

import pytest

import opsassist.fixtures as fx
from opsassist.bench import (
    BenchCase,
    BenchReport,
    CaseResult,
    DelayedProvider,
    load_cases,
    nearest_rank_p90,
    run_bench,
    run_case,
)
from opsassist.textutil import canonical_json


def _case(case_id="c-1", label="disk quota exceeded"):
    return BenchCase(id=case_id, request="the task fails", expected_root_cause=label)


# -------------------------------------------------------------------- loading


def test_case_requires_id_and_label():
    with pytest.raises(ValueError, match="case id"):
        BenchCase(id="  ", request="x", expected_root_cause="y")
    with pytest.raises(ValueError, match="c-9"):
        BenchCase(id="c-9", request="x", expected_root_cause=" ")


def test_case_context_default_shape():
    case = _case()
    assert case.context() == {
        "request_type": "troubleshooting",
        "text": "the task fails",
        "fields": {"symptom": "the task fails"},
        "keywords": [],
    }


def test_case_context_prefers_structured_context():
    context = {"request_type": "consultation", "fields": {"topic": "storage"}}
    case = BenchCase(
        id="c-2", request="", expected_root_cause="n/a", structured_context=context
    )
    assert case.context() == context
    assert case.context() is not context


def test_load_cases_skips_blanks_and_reports_bad_lines(tmp_path):
    path = tmp_path / "cases.jsonl"
    rows = [
        json.dumps({"id": "c-1", "request": "a", "expected_root_cause": "x"}),
        "",
        json.dumps({"id": "c-2", "request": "b", "expected_root_cause": "y"}),
    ]
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")
    cases = load_cases(path)
    assert [c.id for c in cases] == ["c-1", "c-2"]

    path.write_text(json.dumps({"id": "c-3"}) + "\n", encoding="utf-8")
    with pytest.raises(ValueError, match=rf"{path}:1: bad case record"):
        load_cases(path)


# ---------------------------------------------------------------- aggregation


def test_nearest_rank_p90():
    assert nearest_rank_p90([]) == 0.0
    assert nearest_rank_p90([5.0]) == 5.0
    assert nearest_rank_p90([1.0, 2.0]) == 2.0
    assert nearest_rank_p90([float(i) for i in range(1, 11)]) == 9.0


def test_aggregate_excludes_errored_rows():
    rows = [
        CaseResult(case_id="a", match=True, wall_time_s=1.0, retrieval_iterations=2),
        CaseResult(case_id="b", match=False, wall_time_s=3.0, retrieval_iterations=4),
        CaseResult(case_id="c", error="RuntimeError: boom", wall_time_s=9.0),
    ]
    report = BenchReport.aggregate("full", rows)
    assert report.cases == 3
    assert report.scored == 2
    assert report.matches == 1
    assert report.errors == 1
    assert report.accuracy == 0.5
    assert report.mean_latency_s == 2.0
    assert report.mean_retrieval_iterations == 3.0


def test_aggregate_of_nothing_is_zeroes():
    report = BenchReport.aggregate("cot", [])
    assert report.cases == 0
    assert report.accuracy == 0.0
    assert report.p90_latency_s == 0.0


def test_report_to_dict_carries_rows():
    report = BenchReport.aggregate("rag", [CaseResult(case_id="a", match=True)])
    payload = report.to_dict()
    assert payload["mode"] == "rag"
    assert payload["rows"][0]["case_id"] == "a"
    assert set(payload) == {
        "mode",
        "cases",
        "scored",
        "matches",
        "errors",
        "accuracy",
        "mean_latency_s",
        "p90_latency_s",
        "mean_retrieval_iterations",
        "rows",
    }


# ------------------------------------------------------------------ run_case


def test_unknown_mode_is_rejected_before_running():
    with pytest.raises(ValueError, match="unknown bench mode"):
        run_case(None, _case(), "exhaustive")


def test_case_errors_are_isolated(tmp_path):
    class _Boom:
        def diagnose(self, context):
            raise RuntimeError("boom")

    runtime = SimpleNamespace(pipeline=_Boom())
    trace_dir = tmp_path / "traces"
    report = run_bench(runtime, [_case()], "full", trace_dir=trace_dir)
    assert report.errors == 1
    assert report.scored == 0
    assert report.accuracy == 0.0
    assert report.rows[0].error == "RuntimeError: boom"
    assert list(trace_dir.iterdir()) == []


def test_delayed_provider_sleeps_then_forwards():
    inner = SimpleNamespace(
        provider_id="scripted", chat=lambda request: ("reply", request)
    )
    delayed = DelayedProvider(inner, 0.02)
    assert delayed.provider_id == "scripted"
    started = time.perf_counter()
    reply, seen = delayed.chat("req")
    assert time.perf_counter() - started >= 0.02
    assert reply == "reply"
    assert seen == "req"


# ------------------------------------------------------------- replay worlds


MODE_EXPECTATIONS = {
    "cot": (0.2, 0.0),
    "rag": (0.8, 1.0),
    "vanilla_deepsearch": (0.8, 1.0),
    "full": (1.0, 1.1),
}


@pytest.mark.parametrize("mode", sorted(MODE_EXPECTATIONS))
def test_mode_accuracy_on_replay_corpus(make_runtime, mode):
    runtime = make_runtime()
    cases = fx.world_bench_cases(runtime)
    report = run_bench(
        runtime, cases, mode, trace_dir=runtime.data_dir / "traces" / mode
    )
    accuracy, retrievals = MODE_EXPECTATIONS[mode]
    assert report.cases == 10
    assert report.scored == 10
    assert report.errors == 0
    assert report.accuracy == pytest.approx(accuracy)
    assert report.mean_retrieval_iterations == pytest.approx(retrievals)


def test_full_mode_beats_single_shot_and_direct(make_runtime):
    reports = {}
    for mode in MODE_EXPECTATIONS:
        runtime = make_runtime()
        reports[mode] = run_bench(runtime, fx.world_bench_cases(runtime), mode)
    assert reports["full"].accuracy > reports["rag"].accuracy
    assert reports["rag"].accuracy > reports["cot"].accuracy
    assert reports["full"].accuracy > reports["vanilla_deepsearch"].accuracy
    assert reports["cot"].mean_retrieval_iterations == 0.0


def test_full_mode_trace_files_match_console_envelopes(make_runtime):
    runtime = make_runtime()
    cases = fx.world_bench_cases(runtime)
    trace_dir = runtime.data_dir / "traces" / "full"
    run_bench(runtime, cases, "full", trace_dir=trace_dir)
    written = sorted(p.name for p in trace_dir.iterdir())
    assert written == sorted(f"{case.id}.json" for case in cases)

    twin = make_runtime()
    case = next(c for c in cases if c.id == "b-001")
    turn = twin.pipeline.diagnose(case.context())
    expected = canonical_json(turn.envelope("console")).encode("utf-8")
    assert (trace_dir / "b-001.json").read_bytes() == expected


def test_evidence_filter_strips_decoy_citations_under_noise(make_runtime):
    case = fx.bench_case("kafka")

    full = run_bench(make_runtime(noise=True), [case], "full")
    assert full.accuracy == 1.0
    assert full.rows[0].citations == [fx.KAFKA_SOP_ID]

    vanilla = run_bench(make_runtime(noise=True), [case], "vanilla_deepsearch")
    assert vanilla.accuracy == 1.0
    cited = vanilla.rows[0].citations
    assert fx.KAFKA_SOP_ID in cited
    assert any(decoy in cited for decoy in fx.NOISE_SOP_IDS)
