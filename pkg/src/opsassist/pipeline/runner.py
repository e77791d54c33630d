"""Orchestrates the five chat stages and the console diagnosis path.

Both channels converge on the same routed execution: an IntentRecord goes
through routing, optionally the quick-answer stage, then the investigation
loop and summarization. Traces carry no wall-clock data, so identical
intents produce identical trace bytes regardless of the entry channel.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping

from opsassist.config import EngineConfig, PipelineConfig, RetrievalConfig
from opsassist.engine.loop import InvestigationEngine
from opsassist.engine.types import EngineOptions, FinalAnswer
from opsassist.intents import (
    IntentRecord,
    compute_fields,
    intent_from_structured_context,
    required_fields_for,
)
from opsassist.llm.gateway import CallLog, LLMGateway
from opsassist.llm.types import Budget
from opsassist.pipeline.sessions import Session, SessionStore
from opsassist.pipeline.stages import (
    AgentRegistry,
    classify_intent,
    extract_fields,
    quick_answer,
)
from opsassist.tickets.repo import CaseRepository


@dataclass
class TurnResult:
    kind: str  # "refusal" | "followup" | "answer"
    text: str
    stages: list[dict] = field(default_factory=list)
    answer: FinalAnswer | None = None
    trace: dict | None = None
    followup_field: str | None = None
    citations: tuple[str, ...] = ()

    def envelope(self, channel: str) -> dict:
        return self.trace if self.trace is not None else {
            "channel": channel,
            "stages": self.stages,
            "routing": None,
            "engine": None,
            "answer": None,
            "reply": self.text,
        }


class AssistantPipeline:
    def __init__(
        self,
        gateway: LLMGateway,
        engine: InvestigationEngine,
        agents: AgentRegistry,
        sessions: SessionStore,
        case_repo: CaseRepository | None = None,
        *,
        pipeline_config: PipelineConfig | None = None,
        engine_config: EngineConfig | None = None,
        retrieval_config: RetrievalConfig | None = None,
    ):
        self._gateway = gateway
        self._engine = engine
        self._agents = agents
        self._sessions = sessions
        self._case_repo = case_repo
        self._config = pipeline_config or PipelineConfig()
        self._engine_config = engine_config or EngineConfig()
        self._retrieval_config = retrieval_config or RetrievalConfig()

    # ------------------------------------------------------------- plumbing

    def _new_budget(self) -> Budget:
        return Budget(
            max_chat_calls=self._engine_config.max_chat_calls,
            max_total_tokens=self._engine_config.max_total_tokens,
        )

    def _field_names(self, request_type: str) -> list[str]:
        must, groups = required_fields_for(request_type, self._config)
        names = list(must)
        for group in groups:
            names.extend(group)
        return names

    def _followup_question(self, missing_label: str) -> tuple[str, str]:
        """Question for the first askable field behind a missing label."""
        for name in missing_label.split("|"):
            question = self._config.followup_questions.get(name)
            if question:
                return name, question
        name = missing_label.split("|")[0]
        return name, f"Could you provide the {name.replace('_', ' ')}?"

    # ------------------------------------------------------------ chat path

    def handle_chat_turn(self, session_id: str, text: str) -> TurnResult:
        if not text.strip():
            raise ValueError("message text must be non-empty")
        session = self._sessions.get(session_id)
        with session.lock:
            result = self._handle_chat_locked(session, text)
            session.turns.append({"role": "user", "text": text})
            session.turns.append(
                {"role": "assistant", "text": result.text, "kind": result.kind}
            )
            return result

    def _handle_chat_locked(self, session: Session, text: str) -> TurnResult:
        budget = self._new_budget()
        log = CallLog()
        stages: list[dict] = []

        if not session.clarifying:
            session.reset_request()
            in_scope, request_type, flags = classify_intent(
                self._gateway, text, budget, log
            )
            stages.append(
                {
                    "stage": "intent",
                    "in_scope": in_scope,
                    "request_type": request_type or None,
                    "flags": list(flags),
                }
            )
            if not in_scope:
                return TurnResult(kind="refusal", text=self._config.refusal_text, stages=stages)
            session.request_type = request_type
            session.original_text = text
            session.request_turns = [text]
        else:
            session.awaiting_field = None
            session.request_turns.append(text)

        request_type = session.request_type or "troubleshooting"
        conversation = "\n".join(f"user: {t}" for t in session.request_turns)
        fields, keywords, clarify_flags = extract_fields(
            self._gateway,
            request_type,
            conversation,
            self._field_names(request_type),
            budget,
            log,
        )
        session.collected_fields.update(fields)
        for keyword in keywords:
            if keyword not in session.keywords:
                session.keywords.append(keyword)
        # session memory fills gaps so a field given earlier is never re-asked
        effective_fields = {**session.memory, **session.collected_fields}
        _, missing = compute_fields(request_type, effective_fields, self._config)

        if missing and session.followups_asked < self._config.max_followups:
            field_name, question = self._followup_question(missing[0])
            session.followups_asked += 1
            session.awaiting_field = field_name
            stages.append(
                {
                    "stage": "clarify",
                    "asked_field": field_name,
                    "missing": list(missing),
                    "followups_asked": session.followups_asked,
                    "flags": list(clarify_flags),
                }
            )
            return TurnResult(
                kind="followup", text=question, stages=stages, followup_field=field_name
            )

        stage: dict[str, Any] = {
            "stage": "clarify",
            "missing": list(missing),
            "followups_asked": session.followups_asked,
            "flags": list(clarify_flags),
        }
        if missing and session.followups_asked >= self._config.max_followups:
            stage["flags"].append("followups_exhausted")
        stages.append(stage)

        context = {
            "request_type": request_type,
            "text": session.original_text,
            "fields": effective_fields,
            "keywords": list(session.keywords),
        }
        intent = intent_from_structured_context(context, self._config)
        result = self._run_routed(intent, stages, channel="chat", budget=budget, log=log)
        session.memory.update(effective_fields)
        session.reset_request()
        return result

    # --------------------------------------------------------- console path

    def diagnose(self, context: Mapping[str, Any]) -> TurnResult:
        """Structured one-shot entry: no conversational clarification."""
        intent = intent_from_structured_context(context, self._config)
        stages: list[dict] = [
            {
                "stage": "intent",
                "in_scope": True,
                "request_type": intent.request_type,
                "flags": list(intent.flags),
            }
        ]
        return self._run_routed(intent, stages, channel="console")

    # ------------------------------------------------------- routed execution

    def _run_routed(
        self,
        intent: IntentRecord,
        stages: list[dict],
        channel: str,
        budget: Budget | None = None,
        log: CallLog | None = None,
    ) -> TurnResult:
        budget = budget or self._new_budget()
        log = log or CallLog()
        decision = self._agents.route(intent, self._config.route_threshold)
        stages.append({"stage": "route", **decision.to_dict()})

        if decision.target == "general":
            text, citations, stage = quick_answer(
                self._gateway,
                self._case_repo,
                intent,
                self._config.quick_answer_threshold,
                budget,
                log,
            )
            stages.append(stage)
            if text is not None:
                envelope = {
                    "channel": channel,
                    "stages": stages,
                    "routing": decision.to_dict(),
                    "engine": None,
                    "answer": None,
                    "reply": text,
                }
                return TurnResult(
                    kind="answer",
                    text=text,
                    stages=stages,
                    trace=envelope,
                    citations=citations,
                )

        # General questions search the pooled stores; specialized agents walk
        # the level hierarchy.
        options = EngineOptions(
            flat=decision.target == "general",
            use_filter=True,
            k=self._retrieval_config.loop_k,
            max_iterations=self._engine_config.max_iterations,
        )
        answer, engine_trace = self._engine.run(intent, options, budget=budget, log=log)
        stages.append(
            {
                "stage": "plan_act",
                "target": decision.target,
                "iterations": len(engine_trace.iterations),
                "retrievals": engine_trace.retrieval_iterations(),
            }
        )
        stages.append({"stage": "summarize", "flags": list(answer.flags)})
        envelope = {
            "channel": channel,
            "stages": stages,
            "routing": decision.to_dict(),
            "engine": engine_trace.to_dict(),
            "answer": answer.to_dict(),
            "reply": answer.text,
        }
        return TurnResult(
            kind="answer",
            text=answer.text,
            stages=stages,
            answer=answer,
            trace=envelope,
            citations=answer.citations,
        )
