from opsassist.tickets.types import AssignmentResult, Ticket, TicketLabels
from opsassist.tickets.bayes import (
    CauseModel,
    assign,
    fit,
    joint_scores,
    model_from_dict,
    model_to_dict,
    posterior,
)
from opsassist.tickets.categorize import categorize_ticket
from opsassist.tickets.repo import CaseRepository, ResolvedCase
from opsassist.tickets.store import TicketStore

__all__ = [
    "AssignmentResult",
    "CaseRepository",
    "CauseModel",
    "ResolvedCase",
    "Ticket",
    "TicketLabels",
    "TicketStore",
    "assign",
    "categorize_ticket",
    "fit",
    "joint_scores",
    "model_from_dict",
    "model_to_dict",
    "posterior",
]
