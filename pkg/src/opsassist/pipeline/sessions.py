"""In-memory chat sessions with per-session turn serialization."""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

from opsassist.errors import UnknownSession


@dataclass
class Session:
    id: str
    turns: list[dict] = field(default_factory=list)
    request_type: str | None = None
    original_text: str | None = None
    request_turns: list[str] = field(default_factory=list)
    collected_fields: dict[str, str] = field(default_factory=dict)
    # fields provided earlier in the session; grows monotonically, never re-asked
    memory: dict[str, str] = field(default_factory=dict)
    keywords: list[str] = field(default_factory=list)
    followups_asked: int = 0
    awaiting_field: str | None = None
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @property
    def clarifying(self) -> bool:
        return self.awaiting_field is not None

    def reset_request(self) -> None:
        self.request_type = None
        self.original_text = None
        self.request_turns = []
        self.collected_fields = {}
        self.keywords = []
        self.followups_asked = 0
        self.awaiting_field = None


class SessionStore:
    def __init__(self) -> None:
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()
        self._counter = 0

    def create(self) -> Session:
        with self._lock:
            self._counter += 1
            session = Session(id=f"s-{self._counter:04d}")
            self._sessions[session.id] = session
            return session

    def get(self, session_id: str) -> Session:
        session = self._sessions.get(session_id)
        if session is None:
            raise UnknownSession(f"no session {session_id!r}")
        return session

    def ids(self) -> tuple[str, ...]:
        return tuple(self._sessions)
