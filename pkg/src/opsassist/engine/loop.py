"""Iterative plan, act, observe loop with graceful degradation.

Each iteration asks the planner for one decision, executes it, and appends
what was observed to an append-only evidence list; a final summarization
turns the evidence into a typed answer. Budget exhaustion, malformed model
output, and empty retrievals all degrade to flagged partial behavior
instead of crashing the run.
"""

from __future__ import annotations

from typing import Sequence

from opsassist.config import EngineConfig, RetrievalConfig
from opsassist.engine import prompts
from opsassist.engine.tools import ToolRegistry, parse_tool_args
from opsassist.engine.types import (
    EngineOptions,
    EvidenceRecord,
    FinalAnswer,
    IterationRecord,
    PlannerDecision,
    SolvingState,
    Trace,
)
from opsassist.errors import BudgetExceeded, Level4Requested, MalformedOutput
from opsassist.intents import IntentRecord
from opsassist.kb.hierarchy import KnowledgeHierarchy
from opsassist.kb.types import EvidenceSet, Level, RetrievalQuery
from opsassist.llm.gateway import CallLog, LLMGateway
from opsassist.llm.types import Budget, ChatRequest, Message
from opsassist.textutil import canonical_json, truncate_middle

FALLBACK_TEXT = (
    "The investigation could not produce a confident answer. Please escalate "
    "to the on-call engineer with the collected evidence."
)


def _one_user_message(tag: str, prompt: str) -> ChatRequest:
    return ChatRequest(messages=(Message("user", prompt),), tag=tag)


class InvestigationEngine:
    def __init__(
        self,
        gateway: LLMGateway,
        hierarchy: KnowledgeHierarchy,
        tools: ToolRegistry | None = None,
        *,
        engine_config: EngineConfig | None = None,
        retrieval_config: RetrievalConfig | None = None,
        background: str = "",
        fallback_text: str = FALLBACK_TEXT,
    ):
        self._gateway = gateway
        self._hierarchy = hierarchy
        self._tools = tools or ToolRegistry()
        self._engine = engine_config or EngineConfig()
        self._retrieval = retrieval_config or RetrievalConfig()
        self._background = background
        self._fallback_text = fallback_text

    # ------------------------------------------------------------- planning

    def _new_budget(self) -> Budget:
        return Budget(
            max_chat_calls=self._engine.max_chat_calls,
            max_total_tokens=self._engine.max_total_tokens,
        )

    def plan(
        self,
        state: SolvingState,
        options: EngineOptions,
        budget: Budget,
        log: CallLog | None = None,
    ) -> PlannerDecision:
        """One planner decision; malformed output degrades to a retrieval."""
        storage_levels = self._hierarchy.storage_levels(options.flat)
        levels_text = prompts.render_levels(self._hierarchy.describe_levels(options.flat))
        prompt = prompts.render_planner_prompt(
            state,
            tools_text=self._tools.describe(),
            levels_text=levels_text,
            background=self._background,
            max_iterations=options.max_iterations,
        )
        schema = prompts.planner_schema(storage_levels + [4], self._tools.names())
        try:
            record, _ = self._gateway.chat_structured(
                _one_user_message("planner", prompt), schema, budget=budget, log=log
            )
        except MalformedOutput:
            # keep investigating rather than aborting the whole run
            return PlannerDecision(
                ans_ready=False,
                act="retrieve",
                level=state.current_level,
                query=state.intent.clarified_text,
                flags=("planner_malformed",),
            )
        if record.get("ans_ready") is True:
            return PlannerDecision(ans_ready=True)
        if record.get("act") == "tool":
            tool = record.get("tool") or {}
            return PlannerDecision(
                ans_ready=False,
                act="tool",
                tool_name=str(tool.get("name", "")),
                tool_args=parse_tool_args(tool.get("arguments")),
            )
        return PlannerDecision(
            ans_ready=False,
            act="retrieve",
            level=int(record.get("level", state.current_level)),
            query=str(record.get("query", "")).strip() or state.intent.clarified_text,
        )

    # ------------------------------------------------------------ execution

    def _resolve_level(
        self, requested: int, current: int, storage_levels: Sequence[int]
    ) -> tuple[int, tuple[str, ...]]:
        """Stay-or-descend policy: never ascend, skip over unusable levels."""
        allowed = [lvl for lvl in storage_levels if lvl >= current]
        if requested == 4:
            return 4, ()
        if requested in allowed:
            return requested, ()
        if requested < current:
            return (allowed[0] if allowed else 4), ("level_clamped",)
        deeper = [lvl for lvl in allowed if lvl >= requested]
        return (deeper[0] if deeper else 4), ("level_adjusted",)

    def filter_evidence(
        self,
        intent: IntentRecord,
        query_text: str,
        candidates: EvidenceSet,
        budget: Budget,
        log: CallLog | None = None,
    ) -> tuple[EvidenceSet, tuple[str, ...]]:
        """LLM relevance screen; always returns a subset in original order."""
        if not candidates.items:
            return candidates, ()
        prompt = prompts.render_filter_prompt(intent, query_text, candidates.items)
        schema = prompts.filter_schema([item.ref for item in candidates.items])
        try:
            record, _ = self._gateway.chat_structured(
                _one_user_message("filter", prompt), schema, budget=budget, log=log
            )
        except MalformedOutput:
            return (
                EvidenceSet(candidates.items, candidates.flags + ("filter_failed",)),
                ("filter_failed",),
            )
        keep = set(record.get("keep", ()))
        kept_items = tuple(item for item in candidates.items if item.ref in keep)
        flags = ("filter_empty",) if not kept_items else ()
        return EvidenceSet(kept_items, candidates.flags + flags), flags

    def _run_tool(self, decision: PlannerDecision, state: SolvingState) -> tuple[EvidenceRecord, tuple[str, ...]]:
        name = decision.tool_name or ""
        observation, flags = self._tools.execute(name, decision.tool_args)
        observation = truncate_middle(observation, self._engine.observation_cap_bytes)
        ref = f"tool:{name}#{state.iteration}"
        record = EvidenceRecord(
            kind="tool",
            action=f"call {name}({canonical_json(dict(sorted(decision.tool_args.items())))})",
            ref=ref,
            observation=observation,
        )
        return record, flags

    # ----------------------------------------------------------------- runs

    def run(
        self,
        intent: IntentRecord,
        options: EngineOptions | None = None,
        budget: Budget | None = None,
        log: CallLog | None = None,
    ) -> tuple[FinalAnswer, Trace]:
        options = options or EngineOptions()
        budget = budget or self._new_budget()
        storage_levels = self._hierarchy.storage_levels(options.flat)
        state = SolvingState(
            intent=intent,
            current_level=storage_levels[0] if storage_levels else 4,
        )
        trace = Trace(mode=options.mode_name, request=intent.to_dict())
        partial = False

        for t in range(1, options.max_iterations + 1):
            state.iteration = t
            try:
                decision = self.plan(state, options, budget, log)
            except BudgetExceeded:
                trace.flags.append("budget_exhausted")
                partial = True
                break

            if decision.ans_ready:
                trace.iterations.append(
                    IterationRecord(
                        iteration=t,
                        decision=decision.to_dict(),
                        action="ready",
                        flags=list(decision.flags),
                    )
                )
                break

            if decision.act == "tool":
                record, tool_flags = self._run_tool(decision, state)
                state.evidence.append(record)
                trace.iterations.append(
                    IterationRecord(
                        iteration=t,
                        decision=decision.to_dict(),
                        action="tool",
                        tool=decision.tool_name,
                        tool_args=dict(sorted(decision.tool_args.items())),
                        observation=record.observation,
                        flags=list(decision.flags) + list(tool_flags),
                    )
                )
                continue

            requested = decision.level if decision.level is not None else state.current_level
            resolved, level_flags = self._resolve_level(
                requested, state.current_level, storage_levels
            )
            if resolved == 4:
                state.current_level = 4
                state.evidence.append(
                    EvidenceRecord(
                        kind="note",
                        action="rely on model general knowledge (level 4)",
                        observation="no retriever exists at level 4",
                    )
                )
                trace.iterations.append(
                    IterationRecord(
                        iteration=t,
                        decision=decision.to_dict(),
                        action="model_knowledge",
                        level=4,
                        flags=list(decision.flags) + list(level_flags),
                    )
                )
                continue

            query = RetrievalQuery(
                text=decision.query or intent.clarified_text,
                level=Level(resolved),
                k=options.k,
                coarse_size=max(self._retrieval.coarse_size, options.k),
            )
            try:
                candidates = self._hierarchy.retrieve(query, flat=options.flat)
            except Level4Requested:
                candidates = EvidenceSet(items=(), flags=("level4_requested",))
            state.current_level = resolved

            iteration_flags = list(decision.flags) + list(level_flags)
            budget_broke = False
            if options.use_filter and candidates.items:
                try:
                    kept, filter_flags = self.filter_evidence(
                        intent, query.text, candidates, budget, log
                    )
                    iteration_flags.extend(filter_flags)
                except BudgetExceeded:
                    kept = EvidenceSet(
                        candidates.items, candidates.flags + ("filter_budget_exhausted",)
                    )
                    iteration_flags.append("filter_budget_exhausted")
                    budget_broke = True
            else:
                kept = candidates

            state.evidence.append(
                EvidenceRecord(
                    kind="retrieval",
                    action=f"retrieve level {resolved}: {query.text}",
                    items=kept,
                )
            )
            trace.iterations.append(
                IterationRecord(
                    iteration=t,
                    decision=decision.to_dict(),
                    action="retrieve",
                    level=resolved,
                    query=query.text,
                    candidates=[
                        {"ref": item.ref, "score": item.score} for item in candidates.items
                    ],
                    kept=[item.ref for item in kept.items],
                    flags=iteration_flags + list(kept.flags),
                )
            )
            if budget_broke:
                trace.flags.append("budget_exhausted")
                partial = True
                break

        if partial:
            trace.flags.append("partial")
        answer = self.summarize(state, budget, log, partial=partial)
        trace.answer = answer.to_dict()
        trace.budget = budget.snapshot()
        return answer, trace

    def run_direct(
        self,
        intent: IntentRecord,
        budget: Budget | None = None,
        log: CallLog | None = None,
    ) -> tuple[FinalAnswer, Trace]:
        """No retrieval at all: summarize straight over empty evidence."""
        budget = budget or self._new_budget()
        state = SolvingState(intent=intent, current_level=4)
        trace = Trace(mode="direct", request=intent.to_dict())
        answer = self.summarize(state, budget, log)
        trace.answer = answer.to_dict()
        trace.budget = budget.snapshot()
        return answer, trace

    def run_single_shot(
        self,
        intent: IntentRecord,
        k: int | None = None,
        budget: Budget | None = None,
        log: CallLog | None = None,
    ) -> tuple[FinalAnswer, Trace]:
        """One flat retrieval with no filtering, then summarize."""
        budget = budget or self._new_budget()
        k = k or self._retrieval.single_shot_k
        storage_levels = self._hierarchy.storage_levels(flat=True)
        state = SolvingState(
            intent=intent, current_level=storage_levels[0] if storage_levels else 4
        )
        trace = Trace(mode="single_shot", request=intent.to_dict())
        if storage_levels:
            query = RetrievalQuery(
                text=intent.clarified_text,
                level=Level(storage_levels[0]),
                k=k,
                coarse_size=max(self._retrieval.coarse_size, k),
            )
            candidates = self._hierarchy.retrieve(query, flat=True)
            state.iteration = 1
            state.evidence.append(
                EvidenceRecord(
                    kind="retrieval",
                    action=f"retrieve level {int(query.level)}: {query.text}",
                    items=candidates,
                )
            )
            trace.iterations.append(
                IterationRecord(
                    iteration=1,
                    decision={"ans_ready": False, "act": "retrieve"},
                    action="retrieve",
                    level=int(query.level),
                    query=query.text,
                    candidates=[
                        {"ref": item.ref, "score": item.score} for item in candidates.items
                    ],
                    kept=[item.ref for item in candidates.items],
                    flags=list(candidates.flags),
                )
            )
        answer = self.summarize(state, budget, log)
        trace.answer = answer.to_dict()
        trace.budget = budget.snapshot()
        return answer, trace

    # -------------------------------------------------------------- summary

    def summarize(
        self,
        state: SolvingState,
        budget: Budget,
        log: CallLog | None = None,
        partial: bool = False,
    ) -> FinalAnswer:
        intent = state.intent
        valid_refs = state.valid_refs()
        flags: list[str] = ["partial"] if partial else []
        prompt = prompts.render_summary_prompt(state, valid_refs)
        schema = prompts.summary_schema(intent.request_type)
        try:
            record, _ = self._gateway.chat_structured(
                _one_user_message("summarizer", prompt), schema, budget=budget, log=log
            )
        except BudgetExceeded:
            return self._fallback_answer(state, flags + ["summary_budget_exhausted"])
        except MalformedOutput:
            return self._fallback_answer(state, flags + ["summary_malformed"])

        def strings(name: str) -> tuple[str, ...]:
            raw = record.get(name) or ()
            return tuple(str(v) for v in raw if str(v).strip())

        citations = strings("citations")
        sound = tuple(c for c in citations if c in valid_refs)
        if sound != citations:
            flags.append("citations_stripped")
        missing = list(strings("missing_information"))
        has_evidence = bool(valid_refs)
        if not has_evidence:
            flags.append("no_evidence")
            if not missing:
                missing.append("no supporting evidence was retrieved")
        if intent.missing_fields:
            flags.append("incomplete_intent")
            for name in intent.missing_fields:
                note = f"missing field: {name}"
                if note not in missing:
                    missing.append(note)

        if intent.request_type == "troubleshooting":
            root_cause = str(record.get("root_cause", "")).strip()
            answer = FinalAnswer(
                request_type=intent.request_type,
                text=self._render_text(
                    root_cause=root_cause,
                    investigation=strings("investigation_steps"),
                    resolution=strings("resolution_steps"),
                    missing=tuple(missing),
                ),
                root_cause=root_cause,
                investigation_steps=strings("investigation_steps"),
                resolution_steps=strings("resolution_steps"),
                confirmed_findings=strings("confirmed_findings"),
                hypotheses=strings("hypotheses"),
                missing_information=tuple(missing),
                citations=sound,
                flags=tuple(flags),
            )
        else:
            explanation = str(record.get("explanation", "")).strip()
            recommendation = str(record.get("recommendation", "")).strip()
            text = explanation
            if recommendation:
                text += "\nRecommendation: " + recommendation
            if missing:
                text += "\nMissing information: " + "; ".join(missing)
            answer = FinalAnswer(
                request_type=intent.request_type,
                text=text,
                explanation=explanation,
                recommendation=recommendation,
                missing_information=tuple(missing),
                citations=sound,
                flags=tuple(flags),
            )
        return answer

    @staticmethod
    def _render_text(
        root_cause: str,
        investigation: tuple[str, ...],
        resolution: tuple[str, ...],
        missing: tuple[str, ...],
    ) -> str:
        lines = [f"Root cause: {root_cause or 'undetermined'}"]
        if investigation:
            lines.append("Investigation:")
            lines.extend(f"  {i}. {step}" for i, step in enumerate(investigation, 1))
        if resolution:
            lines.append("Resolution:")
            lines.extend(f"  {i}. {step}" for i, step in enumerate(resolution, 1))
        if missing:
            lines.append("Missing information: " + "; ".join(missing))
        return "\n".join(lines)

    def _fallback_answer(self, state: SolvingState, flags: list[str]) -> FinalAnswer:
        """Best-effort answer without the model: render the top procedure."""
        intent = state.intent
        best = None
        for record in state.evidence:
            if record.items is None:
                continue
            for item in record.items.items:
                if item.level == 1 and (best is None or item.score > best.score):
                    best = item
        if best is not None and self._hierarchy.sop_store is not None:
            try:
                sop = self._hierarchy.sop_store.sop_record(best.ref)
            except Exception:
                sop = None
            if sop is not None and sop.branches:
                branch = sop.branches[0]
                investigation = tuple(
                    f"[{s.target}] {s.action}" for s in branch.investigation_steps
                )
                resolution = tuple(s.action for s in branch.resolution_steps)
                return FinalAnswer(
                    request_type=intent.request_type,
                    text=self._render_text(
                        branch.root_cause, investigation, resolution, ()
                    ),
                    root_cause=branch.root_cause,
                    investigation_steps=investigation,
                    resolution_steps=resolution,
                    citations=(best.ref,),
                    flags=tuple(flags + ["fallback_procedure"]),
                )
        missing = ["the assistant could not compose a reliable answer"]
        for name in intent.missing_fields:
            missing.append(f"missing field: {name}")
        return FinalAnswer(
            request_type=intent.request_type,
            text=self._fallback_text,
            missing_information=tuple(missing),
            flags=tuple(flags + ["fallback_text"]),
        )
