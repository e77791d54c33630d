"""Distilling resolved tickets into curated troubleshooting procedures.

The pipeline screens a ticket, drafts a procedure several times, keeps it
only when enough drafts agree, then folds it into the level-1 base: the
first sufficiently similar existing procedure absorbs it as a merge,
otherwise it lands as a new entry. Unstable extractions go to a human
escalation queue instead of the knowledge base.
"""

from __future__ import annotations

from typing import Any, Mapping, Sequence

from opsassist.config import RetrievalConfig, SopGenConfig
from opsassist.errors import MalformedOutput, ValidationFailed
from opsassist.kb.retrieval import retrieve
from opsassist.kb.sop import SOPRecord, sop_from_dict, sop_to_dict
from opsassist.kb.store import KnowledgeStore
from opsassist.kb.types import Level, Provenance, RetrievalQuery
from opsassist.llm.gateway import CallLog, LLMGateway
from opsassist.llm.schema import SchemaDescriptor
from opsassist.llm.types import Budget, ChatRequest, Message
from opsassist.sopgen.escalation import EscalationQueue
from opsassist.sopgen.types import ExtractionReport, MergeOutcome, ReviewResult, ScreeningVerdict
from opsassist.textutil import canonical_json, extract_json_object
from opsassist.tickets.types import Ticket

SHAPE_HINT = (
    '{"problem_desc": "<error message or question>", "content": [{"root_cause":'
    ' "<cause>", "investigation_steps": [{"step": "1", "target": "<where to look>",'
    ' "action": "<what to check>", "observations": [{"condition": "<finding>",'
    ' "outcome": "confirmed"}, {"condition": "<other finding>", "outcome": "goto 2"}]}],'
    ' "resolution_steps": [{"step": "1", "action": "<fix>"}]}]}'
)

SCREEN_SCHEMA = SchemaDescriptor(
    name="extraction_screen",
    required=("extractable",),
    types={"extractable": bool, "reason": str},
)


def _review_schema(n: int) -> SchemaDescriptor:
    def validate(record: Mapping[str, Any]) -> list[str]:
        problems: list[str] = []
        groups = record.get("groups")
        if not isinstance(groups, list) or not all(isinstance(g, list) for g in groups):
            return ["groups must be a list of lists of draft numbers"]
        seen: list[int] = []
        for group in groups:
            for idx in group:
                if not isinstance(idx, int) or isinstance(idx, bool) or not (1 <= idx <= n):
                    problems.append(f"draft number {idx!r} out of range 1..{n}")
                else:
                    seen.append(idx)
        if sorted(seen) != list(range(1, n + 1)):
            problems.append(f"groups must partition drafts 1..{n} exactly once each")
        rep = record.get("representative")
        if not isinstance(rep, int) or isinstance(rep, bool):
            problems.append("representative must be a draft number")
        elif not problems:
            largest = max(len(g) for g in groups)
            if not any(rep in g for g in groups if len(g) == largest):
                problems.append("representative must belong to a largest group")
        return problems

    return SchemaDescriptor(
        name="draft_review", required=("groups", "representative"), validator=validate
    )


CURATE_SCHEMA = SchemaDescriptor(
    name="procedure_curation",
    required=("decision",),
    enums={"decision": ("merge", "distinct")},
    validator=lambda record: (
        ["merged must be an object when decision is merge"]
        if record.get("decision") == "merge" and not isinstance(record.get("merged"), dict)
        else []
    ),
)


def _merge_provenance(
    existing: Sequence[Provenance], incoming: Sequence[Provenance]
) -> tuple[Provenance, ...]:
    out: list[Provenance] = []
    seen: set[tuple[str, str | None]] = set()
    for prov in tuple(existing) + tuple(incoming):
        key = (prov.kind, prov.ref)
        if key not in seen:
            seen.add(key)
            out.append(prov)
    return tuple(out)


class SopExtractor:
    def __init__(
        self,
        gateway: LLMGateway,
        sop_store: KnowledgeStore,
        *,
        config: SopGenConfig | None = None,
        retrieval: RetrievalConfig | None = None,
        escalations: EscalationQueue | None = None,
    ):
        self._gateway = gateway
        self._store = sop_store
        self._config = config or SopGenConfig()
        self._retrieval = retrieval or RetrievalConfig()
        self._escalations = escalations

    # --------------------------------------------------------------- stages

    def screen(
        self, ticket: Ticket, budget: Budget | None = None, log: CallLog | None = None
    ) -> ScreeningVerdict:
        prompt = "\n".join(
            [
                "Decide whether this resolved ticket contains a reusable",
                "troubleshooting procedure worth distilling. Tickets that are",
                "simple questions, one-off mistakes, or lack a clear resolution",
                "are not extractable.",
                f"Ticket id: {ticket.id}",
                ticket.text(),
                f"Recorded outcome: {ticket.outcome or '(none)'}",
                'Reply with one JSON object: {"extractable": <bool>, "reason": "<short>"}',
            ]
        )
        try:
            record, _ = self._gateway.chat_structured(
                ChatRequest(messages=(Message("user", prompt),), tag="screener"),
                SCREEN_SCHEMA,
                budget=budget,
                log=log,
            )
        except MalformedOutput:
            # an unreadable verdict must not silently drop the ticket
            return ScreeningVerdict(extractable=True, reason="screen output malformed")
        return ScreeningVerdict(
            extractable=bool(record["extractable"]), reason=str(record.get("reason", ""))
        )

    def _author_once(
        self,
        ticket: Ticket,
        run_index: int,
        budget: Budget | None,
        log: CallLog | None,
    ) -> SOPRecord | None:
        """One author pass followed by one editor pass; None when unusable."""
        prompt = "\n".join(
            [
                "Write a structured troubleshooting procedure distilled from",
                "this resolved ticket. Capture the root cause actually found,",
                "the checks that located it, and the fix that worked.",
                f"Draft run: {run_index} of {self._config.generation_runs}",
                f"Ticket id: {ticket.id}",
                ticket.text(),
                f"Recorded outcome: {ticket.outcome or '(none)'}",
                "Reply with one JSON object shaped exactly like:",
                SHAPE_HINT,
            ]
        )
        draft_reply = self._gateway.chat(
            ChatRequest(messages=(Message("user", prompt),), tag="author"),
            budget=budget,
            log=log,
        )
        draft_text, problems = self._try_parse(draft_reply.text)
        edit_prompt = "\n".join(
            [
                "Check and correct this draft troubleshooting procedure.",
                "Fix step numbering (1..n in order), make every goto point at an",
                "existing step, make sure at least one observation per root",
                "cause ends in outcome \"confirmed\", and drop filler text.",
                f"Validation problems found: {'; '.join(problems) if problems else '(none)'}",
                "Draft to check:",
                draft_text if draft_text is not None else draft_reply.text,
                "Reply with the corrected JSON object only, same shape:",
                SHAPE_HINT,
            ]
        )
        edited_reply = self._gateway.chat(
            ChatRequest(messages=(Message("user", edit_prompt),), tag="editor"),
            budget=budget,
            log=log,
        )
        try:
            return sop_from_dict(extract_json_object(edited_reply.text))
        except (ValueError, ValidationFailed):
            return None

    @staticmethod
    def _try_parse(text: str) -> tuple[str | None, list[str]]:
        """Render the draft for the editor and collect validation problems."""
        try:
            raw = extract_json_object(text)
        except ValueError as exc:
            return None, [f"not a JSON object: {exc}"]
        try:
            record = sop_from_dict(raw)
        except ValidationFailed as exc:
            return canonical_json(raw), list(exc.problems)
        return canonical_json(sop_to_dict(record)), []

    def author_drafts(
        self, ticket: Ticket, budget: Budget | None = None, log: CallLog | None = None
    ) -> list[SOPRecord]:
        drafts: list[SOPRecord] = []
        for i in range(1, self._config.generation_runs + 1):
            draft = self._author_once(ticket, i, budget, log)
            if draft is not None:
                drafts.append(draft)
        return drafts

    def review(
        self,
        drafts: Sequence[SOPRecord],
        budget: Budget | None = None,
        log: CallLog | None = None,
    ) -> ReviewResult:
        """Group drafts by semantic agreement; keep only a stable majority."""
        if not drafts:
            return ReviewResult(stable=False, stability_score=0, chosen_index=None)
        if len(drafts) == 1:
            stable = 1 >= self._config.stability_threshold
            return ReviewResult(
                stable=stable,
                stability_score=1,
                chosen_index=0 if stable else None,
                groups=((1,),),
            )
        lines = [
            "Compare these draft troubleshooting procedures for the same",
            "ticket. Group together drafts that agree on the root cause and",
            "the essential investigation and resolution steps; wording",
            "differences do not matter.",
        ]
        for i, draft in enumerate(drafts, start=1):
            lines.append(f"Draft {i}:")
            lines.append(canonical_json(sop_to_dict(draft)))
        lines.append(
            'Reply with one JSON object: {"groups": [[<draft numbers>], ...],'
            ' "representative": <number of the best draft in the largest group>}'
        )
        try:
            record, _ = self._gateway.chat_structured(
                ChatRequest(messages=(Message("user", "\n".join(lines)),), tag="reviewer"),
                _review_schema(len(drafts)),
                budget=budget,
                log=log,
            )
        except MalformedOutput:
            return ReviewResult(stable=False, stability_score=0, chosen_index=None)
        groups = tuple(tuple(int(i) for i in g) for g in record["groups"])
        score = max(len(g) for g in groups)
        stable = score >= self._config.stability_threshold
        return ReviewResult(
            stable=stable,
            stability_score=score,
            chosen_index=int(record["representative"]) - 1 if stable else None,
            groups=groups,
        )

    def curate(
        self,
        record: SOPRecord,
        provenance: Sequence[Provenance],
        budget: Budget | None = None,
        log: CallLog | None = None,
    ) -> tuple[MergeOutcome, tuple[str, ...]]:
        """Fold one reviewed procedure into the base: merge or add."""
        flags: list[str] = []
        index = self._store.build_index()
        similar = ()
        if len(index.entries) > 0:
            query = RetrievalQuery(
                text=record.problem_desc,
                level=Level.SOP,
                k=min(self._config.similar_breadth, len(index.entries)),
                coarse_size=max(self._retrieval.coarse_size, self._config.similar_breadth),
            )
            embedder = self._gateway.embedder
            similar = retrieve(
                query,
                index,
                embed_query=lambda q: embedder.embed([q])[0],
                rrf_constant=self._retrieval.rrf_constant,
                snippet_chars=self._retrieval.snippet_chars,
            ).items

        candidate_json = canonical_json(sop_to_dict(record))
        for item in similar:
            existing_entry = self._store.get(item.ref)
            if existing_entry is None:
                continue
            existing_record = self._store.sop_record(item.ref)
            prompt = "\n".join(
                [
                    "Decide whether these two troubleshooting procedures describe",
                    "the same problem. If they do, merge them into one procedure",
                    "that keeps every distinct root cause branch from both.",
                    "Existing procedure:",
                    canonical_json(sop_to_dict(existing_record)),
                    "Candidate procedure:",
                    candidate_json,
                    'Reply with one JSON object: {"decision": "merge" | "distinct",'
                    ' "merged": <merged procedure or null>}',
                ]
            )
            try:
                verdict, _ = self._gateway.chat_structured(
                    ChatRequest(messages=(Message("user", prompt),), tag="curator"),
                    CURATE_SCHEMA,
                    budget=budget,
                    log=log,
                )
            except MalformedOutput:
                flags.append("curator_malformed")
                continue
            if verdict["decision"] != "merge":
                continue
            try:
                merged = sop_from_dict(verdict["merged"])
            except ValidationFailed:
                flags.append("merge_invalid")
                continue
            if len(merged.branches) < max(len(existing_record.branches), len(record.branches)):
                flags.append("merge_lost_branches")
                continue
            merged = SOPRecord(
                problem_desc=merged.problem_desc,
                branches=merged.branches,
                provenance=_merge_provenance(existing_entry.provenance, provenance),
            )
            entry = self._store.upsert_sop(merged, replace_id=item.ref)
            return (
                MergeOutcome(
                    action="replace",
                    entry_id=entry.id,
                    replaced_id=item.ref,
                    branches_before=len(existing_record.branches),
                    branches_after=len(merged.branches),
                ),
                tuple(flags),
            )

        final = SOPRecord(
            problem_desc=record.problem_desc,
            branches=record.branches,
            provenance=tuple(provenance),
        )
        entry = self._store.upsert_sop(final)
        return (
            MergeOutcome(
                action="add",
                entry_id=entry.id,
                branches_before=0,
                branches_after=len(record.branches),
            ),
            tuple(flags),
        )

    # ------------------------------------------------------------ top level

    def extract_and_integrate(
        self, ticket: Ticket, budget: Budget | None = None, log: CallLog | None = None
    ) -> ExtractionReport:
        verdict = self.screen(ticket, budget, log)
        if not verdict.extractable:
            return ExtractionReport(
                ticket_id=ticket.id, screened_out=True, reason=verdict.reason
            )
        drafts = self.author_drafts(ticket, budget, log)
        review = self.review(drafts, budget, log)
        if not review.stable:
            if self._escalations is not None:
                self._escalations.append(
                    {
                        "ticket_id": ticket.id,
                        "stability_score": review.stability_score,
                        "drafts": [sop_to_dict(d) for d in drafts],
                        "reason": "drafts disagree below the stability threshold",
                    }
                )
            return ExtractionReport(
                ticket_id=ticket.id,
                runs=self._config.generation_runs,
                valid_drafts=len(drafts),
                stability_score=review.stability_score,
                escalated=True,
            )
        chosen = drafts[review.chosen_index or 0]
        outcome, flags = self.curate(
            chosen, [Provenance(kind="distilled", ref=ticket.id)], budget, log
        )
        return ExtractionReport(
            ticket_id=ticket.id,
            runs=self._config.generation_runs,
            valid_drafts=len(drafts),
            stability_score=review.stability_score,
            outcome=outcome,
            flags=flags,
        )
