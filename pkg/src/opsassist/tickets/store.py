"""Durable ticket storage with labels and cause assignments."""

from __future__ import annotations

import json
import os
import tempfile
import threading
from pathlib import Path
from typing import Sequence

from opsassist.errors import UnknownTicket
from opsassist.tickets.types import AssignmentResult, Ticket, TicketLabels


class TicketStore:
    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._tickets: dict[str, Ticket] = {}
        self._labels: dict[str, TicketLabels] = {}
        self._assignments: dict[str, dict] = {}
        self._order: list[str] = []
        self._load()

    def _load(self) -> None:
        if not self.path.exists():
            return
        with open(self.path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                row = json.loads(line)
                ticket = Ticket.from_dict(row["ticket"])
                self._tickets[ticket.id] = ticket
                self._order.append(ticket.id)
                if row.get("labels"):
                    self._labels[ticket.id] = TicketLabels.from_dict(row["labels"])
                if row.get("assignment"):
                    self._assignments[ticket.id] = row["assignment"]

    def _persist_locked(self) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=str(self.path.parent), suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                for ticket_id in self._order:
                    ticket = self._tickets[ticket_id]
                    row = {"ticket": ticket.to_dict()}
                    labels = self._labels.get(ticket_id)
                    if labels is not None:
                        row["labels"] = labels.to_dict()
                    assignment = self._assignments.get(ticket_id)
                    if assignment is not None:
                        row["assignment"] = assignment
                    fh.write(json.dumps(row, ensure_ascii=False))
                    fh.write("\n")
            os.replace(tmp, self.path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    # -------------------------------------------------------------- queries

    def get(self, ticket_id: str) -> Ticket:
        ticket = self._tickets.get(ticket_id)
        if ticket is None:
            raise UnknownTicket(f"no ticket {ticket_id!r}")
        return ticket

    def labels(self, ticket_id: str) -> TicketLabels | None:
        self.get(ticket_id)
        return self._labels.get(ticket_id)

    def assignment(self, ticket_id: str) -> dict | None:
        self.get(ticket_id)
        return self._assignments.get(ticket_id)

    def all(self) -> tuple[Ticket, ...]:
        return tuple(self._tickets[i] for i in self._order)

    def pending(self) -> tuple[Ticket, ...]:
        return tuple(t for t in self.all() if t.status == "pending")

    def __len__(self) -> int:
        return len(self._order)

    # ------------------------------------------------------------ mutations

    def add(self, turns: Sequence[tuple[str, str]], outcome: str = "") -> Ticket:
        with self._lock:
            ticket_id = f"t-{len(self._order) + 1:04d}"
            while ticket_id in self._tickets:
                ticket_id = f"t-{int(ticket_id.split('-')[1]) + 1:04d}"
            ticket = Ticket(id=ticket_id, turns=tuple(turns), outcome=outcome)
            self._tickets[ticket_id] = ticket
            self._order.append(ticket_id)
            self._persist_locked()
            return ticket

    def set_status(self, ticket_id: str, status: str) -> Ticket:
        with self._lock:
            old = self.get(ticket_id)
            updated = Ticket(id=old.id, turns=old.turns, outcome=old.outcome, status=status)
            self._tickets[ticket_id] = updated
            self._persist_locked()
            return updated

    def set_labels(self, ticket_id: str, labels: TicketLabels) -> None:
        with self._lock:
            old = self.get(ticket_id)
            self._labels[ticket_id] = labels
            self._tickets[ticket_id] = Ticket(
                id=old.id, turns=old.turns, outcome=old.outcome, status="labeled"
            )
            self._persist_locked()

    def set_assignment(self, ticket_id: str, result: AssignmentResult) -> None:
        with self._lock:
            old = self.get(ticket_id)
            self._assignments[ticket_id] = result.to_dict()
            status = "assigned" if result.decision == "auto" else "manual"
            self._tickets[ticket_id] = Ticket(
                id=old.id, turns=old.turns, outcome=old.outcome, status=status
            )
            self._persist_locked()
