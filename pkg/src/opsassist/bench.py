"""Scripted benchmark harness.

Cases are line-delimited JSON records with an expected root-cause label.
Four modes exercise progressively more of the engine:

    cot                 no retrieval, answer from the model alone
    rag                 one flat retrieval (k = single-shot k), no filtering
    vanilla_deepsearch  iterative loop over pooled stores, no filtering
    full                the production path: routed diagnosis over the
                        level hierarchy with evidence filtering

``full`` drives the same :meth:`AssistantPipeline.diagnose` the HTTP service
uses, so a case produces byte-identical answers and traces on both paths.
Accuracy is a normalized string match between the answer's root cause and
the expected label; errored cases are excluded from accuracy and reported.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

from opsassist.engine.types import EngineOptions, FinalAnswer
from opsassist.intents import intent_from_structured_context
from opsassist.llm.gateway import CallLog
from opsassist.llm.types import Budget, ChatRequest, ChatResponse
from opsassist.runtime import Runtime
from opsassist.textutil import canonical_json, normalize_label

MODES = ("cot", "rag", "vanilla_deepsearch", "full")


@dataclass(frozen=True)
class BenchCase:
    id: str
    request: str
    expected_root_cause: str
    structured_context: Mapping[str, Any] | None = None
    expected_sop_id: str | None = None
    has_logs: bool = False

    def __post_init__(self) -> None:
        if not self.id.strip():
            raise ValueError("case id must be non-empty")
        if not self.expected_root_cause.strip():
            raise ValueError(f"case {self.id}: expected label must be non-empty")

    def context(self) -> dict:
        """Structured context for the diagnosis path."""
        if self.structured_context is not None:
            return dict(self.structured_context)
        return {
            "request_type": "troubleshooting",
            "text": self.request,
            "fields": {"symptom": self.request},
            "keywords": [],
        }

    @staticmethod
    def from_dict(row: Mapping[str, Any]) -> "BenchCase":
        return BenchCase(
            id=str(row["id"]),
            request=str(row.get("request", "")),
            expected_root_cause=str(row["expected_root_cause"]),
            structured_context=row.get("structured_context"),
            expected_sop_id=row.get("expected_sop_id"),
            has_logs=bool(row.get("has_logs", False)),
        )


@dataclass
class CaseResult:
    case_id: str
    match: bool = False
    answer_root_cause: str = ""
    citations: list[str] = field(default_factory=list)
    iterations: int = 0
    retrieval_iterations: int = 0
    wall_time_s: float = 0.0
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "case_id": self.case_id,
            "match": self.match,
            "answer_root_cause": self.answer_root_cause,
            "citations": self.citations,
            "iterations": self.iterations,
            "retrieval_iterations": self.retrieval_iterations,
            "wall_time_s": self.wall_time_s,
            "error": self.error,
        }


@dataclass
class BenchReport:
    mode: str
    rows: list[CaseResult]
    cases: int
    scored: int
    matches: int
    errors: int
    accuracy: float
    mean_latency_s: float
    p90_latency_s: float
    mean_retrieval_iterations: float

    @staticmethod
    def aggregate(mode: str, rows: Sequence[CaseResult]) -> "BenchReport":
        rows = list(rows)
        scored = [r for r in rows if r.error is None]
        matches = sum(1 for r in scored if r.match)
        latencies = [r.wall_time_s for r in scored]
        retrievals = [r.retrieval_iterations for r in scored]
        return BenchReport(
            mode=mode,
            rows=rows,
            cases=len(rows),
            scored=len(scored),
            matches=matches,
            errors=len(rows) - len(scored),
            accuracy=matches / len(scored) if scored else 0.0,
            mean_latency_s=sum(latencies) / len(latencies) if latencies else 0.0,
            p90_latency_s=nearest_rank_p90(latencies),
            mean_retrieval_iterations=(
                sum(retrievals) / len(retrievals) if retrievals else 0.0
            ),
        )

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "cases": self.cases,
            "scored": self.scored,
            "matches": self.matches,
            "errors": self.errors,
            "accuracy": self.accuracy,
            "mean_latency_s": self.mean_latency_s,
            "p90_latency_s": self.p90_latency_s,
            "mean_retrieval_iterations": self.mean_retrieval_iterations,
            "rows": [r.to_dict() for r in self.rows],
        }


def nearest_rank_p90(values: Sequence[float]) -> float:
    if not values:
        return 0.0
    ordered = sorted(values)
    rank = math.ceil(0.9 * len(ordered))
    return ordered[rank - 1]


def load_cases(path: str | Path) -> list[BenchCase]:
    cases: list[BenchCase] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                cases.append(BenchCase.from_dict(json.loads(line)))
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: bad case record: {exc}") from exc
    return cases


class DelayedProvider:
    """Adds a fixed synthetic delay per chat call for latency shaping."""

    def __init__(self, inner, delay_s: float):
        self._inner = inner
        self._delay = delay_s
        self.provider_id = getattr(inner, "provider_id", "delayed")

    def chat(self, request: ChatRequest) -> ChatResponse:
        if self._delay > 0:
            time.sleep(self._delay)
        return self._inner.chat(request)


def _labels_match(answer: FinalAnswer | None, expected: str) -> tuple[bool, str]:
    got = answer.root_cause if answer is not None else ""
    return normalize_label(got) == normalize_label(expected), got


def run_case(runtime: Runtime, case: BenchCase, mode: str) -> tuple[CaseResult, dict | None]:
    """Run one case; returns its row and the trace payload (None on error)."""
    if mode not in MODES:
        raise ValueError(f"unknown bench mode {mode!r}")
    result = CaseResult(case_id=case.id)
    started = time.perf_counter()
    try:
        if mode == "full":
            turn = runtime.pipeline.diagnose(case.context())
            payload = turn.envelope("console")
            answer = turn.answer
            engine_part = payload.get("engine") or {}
            iterations = engine_part.get("iterations", [])
            result.iterations = len(iterations)
            result.retrieval_iterations = sum(
                1 for rec in iterations if rec.get("action") == "retrieve"
            )
        else:
            intent = intent_from_structured_context(
                case.context(), runtime.config.pipeline
            )
            budget = runtime.new_budget()
            log = CallLog()
            if mode == "cot":
                answer, trace = runtime.engine.run_direct(intent, budget, log)
            elif mode == "rag":
                answer, trace = runtime.engine.run_single_shot(
                    intent, k=runtime.config.retrieval.single_shot_k, budget=budget, log=log
                )
            else:  # vanilla_deepsearch
                options = EngineOptions(
                    flat=True,
                    use_filter=False,
                    k=runtime.config.retrieval.loop_k,
                    max_iterations=runtime.config.engine.max_iterations,
                )
                answer, trace = runtime.engine.run(intent, options, budget=budget, log=log)
            payload = trace.to_dict()
            result.iterations = len(trace.iterations)
            result.retrieval_iterations = trace.retrieval_iterations()
        result.wall_time_s = time.perf_counter() - started
        result.match, result.answer_root_cause = _labels_match(
            answer, case.expected_root_cause
        )
        result.citations = list(answer.citations) if answer is not None else []
        return result, payload
    except Exception as exc:
        result.wall_time_s = time.perf_counter() - started
        result.error = f"{type(exc).__name__}: {exc}"
        return result, None


def run_bench(
    runtime: Runtime,
    cases: Sequence[BenchCase],
    mode: str,
    *,
    trace_dir: str | Path | None = None,
) -> BenchReport:
    rows: list[CaseResult] = []
    out_dir = Path(trace_dir) if trace_dir else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)
    for case in cases:
        row, payload = run_case(runtime, case, mode)
        rows.append(row)
        if out_dir and payload is not None:
            path = out_dir / f"{case.id}.json"
            path.write_bytes(canonical_json(payload).encode("utf-8"))
    return BenchReport.aggregate(mode, rows)
