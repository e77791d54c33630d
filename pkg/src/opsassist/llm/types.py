"""Core value types shared by every provider and the gateway."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from opsassist.errors import BudgetExceeded, DimensionMismatch

ROLES = ("system", "user", "assistant")


@dataclass(frozen=True)
class Message:
    role: str
    text: str

    def __post_init__(self) -> None:
        if self.role not in ROLES:
            raise ValueError(f"unknown role: {self.role!r}")
        if not isinstance(self.text, str):
            raise ValueError("message text must be a string")


@dataclass(frozen=True)
class ChatRequest:
    """One chat call: ordered messages plus sampling knobs and a stage tag."""

    messages: tuple[Message, ...]
    tag: str = "general"
    temperature: float = 0.1
    top_p: float = 0.95
    max_tokens: int = 1024

    def __post_init__(self) -> None:
        if not self.messages:
            raise ValueError("chat request needs at least one message")
        if not (0.0 <= self.temperature <= 2.0):
            raise ValueError("temperature out of range")
        if not (0.0 < self.top_p <= 1.0):
            raise ValueError("top_p out of range")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be positive")
        if not self.tag:
            raise ValueError("tag must be non-empty")


def request(tag: str, *pairs: tuple[str, str], **knobs) -> ChatRequest:
    msgs = tuple(Message(role, text) for role, text in pairs)
    return ChatRequest(messages=msgs, tag=tag, **knobs)


@dataclass(frozen=True)
class ChatResponse:
    text: str
    token_usage: tuple[int, int]
    provider_id: str

    @property
    def total_tokens(self) -> int:
        return self.token_usage[0] + self.token_usage[1]


def estimate_tokens(text: str) -> int:
    # crude fallback when the provider reports no usage
    return max(1, len(text) // 4)


@dataclass(frozen=True)
class EmbeddingVector:
    values: tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.values:
            raise ValueError("embedding must have at least one component")

    @property
    def dimension(self) -> int:
        return len(self.values)

    @property
    def norm(self) -> float:
        return math.sqrt(sum(v * v for v in self.values))

    def cosine(self, other: "EmbeddingVector") -> float:
        if self.dimension != other.dimension:
            raise DimensionMismatch(
                f"cosine over mismatched dimensions: {self.dimension} vs {other.dimension}"
            )
        dot = sum(a * b for a, b in zip(self.values, other.values))
        denom = self.norm * other.norm
        if denom == 0.0:
            return 0.0
        return dot / denom


@dataclass
class Budget:
    """Per-request spending limits, enforced before each dispatch."""

    max_chat_calls: int
    max_total_tokens: int
    chat_calls: int = 0
    total_tokens: int = 0
    _exhausted: bool = field(default=False, repr=False)

    def check_can_call(self) -> None:
        if self._exhausted:
            raise BudgetExceeded("token budget exhausted")
        if self.chat_calls + 1 > self.max_chat_calls:
            raise BudgetExceeded(
                f"chat call budget exhausted ({self.chat_calls}/{self.max_chat_calls})"
            )
        if self.total_tokens >= self.max_total_tokens:
            raise BudgetExceeded(
                f"token budget exhausted ({self.total_tokens}/{self.max_total_tokens})"
            )

    def charge(self, prompt_tokens: int, completion_tokens: int) -> None:
        if prompt_tokens < 0 or completion_tokens < 0:
            raise ValueError("token counts must be non-negative")
        self.chat_calls += 1
        spent = self.total_tokens + prompt_tokens + completion_tokens
        if spent >= self.max_total_tokens:
            # counters stay within limits; the flag blocks the next call
            self._exhausted = True
        self.total_tokens = min(spent, self.max_total_tokens)

    @property
    def exhausted(self) -> bool:
        if self._exhausted:
            return True
        return self.chat_calls >= self.max_chat_calls or self.total_tokens >= self.max_total_tokens

    def snapshot(self) -> dict:
        return {
            "chat_calls": self.chat_calls,
            "max_chat_calls": self.max_chat_calls,
            "total_tokens": self.total_tokens,
            "max_total_tokens": self.max_total_tokens,
        }


def messages_from_dicts(raw: Iterable[Mapping[str, str]]) -> tuple[Message, ...]:
    return tuple(Message(m["role"], m["text"]) for m in raw)
