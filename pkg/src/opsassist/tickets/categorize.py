"""LLM labeling of resolved tickets into structured categories."""

from __future__ import annotations

from typing import Sequence

from opsassist.intents import REQUEST_TYPES
from opsassist.llm.gateway import CallLog, LLMGateway
from opsassist.llm.schema import SchemaDescriptor
from opsassist.llm.types import Budget, ChatRequest, Message
from opsassist.tickets.types import Ticket, TicketLabels

LABEL_SCHEMA = SchemaDescriptor(
    name="ticket_labels",
    required=("system", "module", "request_type", "summary"),
    types={
        "system": str,
        "module": str,
        "request_type": str,
        "summary": str,
        "keywords": list,
        "final_actions": list,
    },
    enums={"request_type": REQUEST_TYPES},
)


def _label_prompt(ticket: Ticket, vocabulary: Sequence[str]) -> str:
    lines = [
        "Label this resolved support ticket.",
        f"Ticket id: {ticket.id}",
        "Conversation:",
        ticket.text(),
    ]
    if ticket.outcome:
        lines.append(f"Recorded outcome: {ticket.outcome}")
    lines.append(
        "Reply with one JSON object with keys: system (string), module"
        " (string), request_type (troubleshooting or consultation), summary"
        " (one sentence), keywords (list of strings), final_actions (list of"
        " strings)."
    )
    lines.append(
        "final_actions must come from this closed vocabulary: "
        + ", ".join(vocabulary)
    )
    return "\n".join(lines)


def categorize_ticket(
    gateway: LLMGateway,
    ticket: Ticket,
    vocabulary: Sequence[str],
    budget: Budget | None = None,
    log: CallLog | None = None,
) -> TicketLabels:
    """Produce structured labels; raises MalformedOutput when irreparable."""
    request = ChatRequest(
        messages=(Message("user", _label_prompt(ticket, vocabulary)),), tag="labels"
    )
    record, _ = gateway.chat_structured(request, LABEL_SCHEMA, budget=budget, log=log)
    allowed = set(vocabulary)
    raw_actions = [str(a) for a in record.get("final_actions") or ()]
    actions = tuple(a for a in raw_actions if a in allowed)
    flags: tuple[str, ...] = ()
    if len(actions) != len(raw_actions):
        flags = ("unknown_actions_dropped",)
    return TicketLabels(
        system=str(record["system"]),
        module=str(record["module"]),
        request_type=str(record["request_type"]),
        summary=str(record["summary"]),
        keywords=tuple(str(k) for k in record.get("keywords") or ()),
        final_actions=actions,
        flags=flags,
    )
