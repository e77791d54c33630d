"""Single entry point for chat, embeddings, and structured output.

Routes stage tags to providers, enforces budgets before dispatch, bounds
concurrency, and drives the one-retry repair loop for structured replies.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from opsassist.errors import (
    DimensionMismatch,
    MalformedOutput,
    ProviderUnavailable,
    SchemaViolation,
)
from opsassist.llm.fingerprint import fingerprint
from opsassist.llm.providers import ChatProvider, Embedder
from opsassist.llm.schema import SchemaDescriptor, parse_object
from opsassist.llm.types import Budget, ChatRequest, ChatResponse, EmbeddingVector, Message


@dataclass(frozen=True)
class CallRecord:
    tag: str
    fingerprint: str
    provider_id: str
    prompt_tokens: int
    completion_tokens: int
    response_chars: int


@dataclass
class CallLog:
    records: list[CallRecord] = field(default_factory=list)

    def append(self, record: CallRecord) -> None:
        self.records.append(record)

    def count(self, tag: str | None = None) -> int:
        if tag is None:
            return len(self.records)
        return sum(1 for r in self.records if r.tag == tag)


class LLMGateway:
    def __init__(
        self,
        providers: Mapping[str, ChatProvider],
        embedder: Embedder,
        *,
        default_provider: str = "default",
        stage_providers: Mapping[str, str] | None = None,
        max_concurrency: int = 8,
    ):
        if default_provider not in providers:
            raise ValueError(f"default provider {default_provider!r} not configured")
        self._providers = dict(providers)
        self._embedder = embedder
        self._default = default_provider
        self._stage_providers = dict(stage_providers or {})
        for tag, name in self._stage_providers.items():
            if name not in self._providers:
                raise ValueError(f"stage {tag!r} routed to unknown provider {name!r}")
        if max_concurrency < 1:
            raise ValueError("max_concurrency must be positive")
        self._semaphore = threading.Semaphore(max_concurrency)

    @property
    def embedder(self) -> Embedder:
        return self._embedder

    def provider_for(self, tag: str) -> ChatProvider:
        name = self._stage_providers.get(tag, self._default)
        try:
            return self._providers[name]
        except KeyError:
            raise ProviderUnavailable(f"no provider configured under {name!r}")

    def chat(
        self,
        request: ChatRequest,
        *,
        budget: Budget | None = None,
        log: CallLog | None = None,
    ) -> ChatResponse:
        if not request.messages:
            raise ValueError("chat request needs at least one message")
        if budget is not None:
            budget.check_can_call()
        provider = self.provider_for(request.tag)
        with self._semaphore:
            response = provider.chat(request)
        if budget is not None:
            budget.charge(*response.token_usage)
        if log is not None:
            log.append(
                CallRecord(
                    tag=request.tag,
                    fingerprint=fingerprint(request.tag, request.messages),
                    provider_id=response.provider_id,
                    prompt_tokens=response.token_usage[0],
                    completion_tokens=response.token_usage[1],
                    response_chars=len(response.text),
                )
            )
        return response

    def embed(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        if not texts:
            raise ValueError("embed needs at least one text")
        for text in texts:
            if not text.strip():
                raise ValueError("embed input texts must be non-empty")
        vectors = self._embedder.embed(texts)
        expected = self._embedder.dimension
        for vec in vectors:
            if vec.dimension != expected:
                raise DimensionMismatch(
                    f"embedder returned dimension {vec.dimension}, expected {expected}"
                )
        return vectors

    def parse_structured(
        self,
        response: ChatResponse,
        schema: SchemaDescriptor,
        *,
        request: ChatRequest | None = None,
        budget: Budget | None = None,
        log: CallLog | None = None,
    ) -> dict:
        """Parse a reply against a schema, with exactly one repair attempt.

        The repair re-prompts the same stage with the validation problems
        appended; without the originating request no repair is possible.
        """
        try:
            return parse_object(response.text, schema)
        except SchemaViolation as first:
            if request is None:
                raise MalformedOutput(
                    f"reply failed schema '{schema.name}' and no repair context given",
                    first.problems,
                ) from first
            repair = ChatRequest(
                messages=request.messages
                + (
                    Message("assistant", response.text),
                    Message(
                        "user",
                        "Your previous reply was not valid. Problems: "
                        + "; ".join(first.problems)
                        + ". Reply again with only one JSON object. "
                        + schema.describe(),
                    ),
                ),
                tag=request.tag,
                temperature=request.temperature,
                top_p=request.top_p,
                max_tokens=request.max_tokens,
            )
            second = self.chat(repair, budget=budget, log=log)
            try:
                return parse_object(second.text, schema)
            except SchemaViolation as again:
                raise MalformedOutput(
                    f"reply failed schema '{schema.name}' after one repair attempt",
                    again.problems,
                ) from again

    def chat_structured(
        self,
        request: ChatRequest,
        schema: SchemaDescriptor,
        *,
        budget: Budget | None = None,
        log: CallLog | None = None,
    ) -> tuple[dict, ChatResponse]:
        response = self.chat(request, budget=budget, log=log)
        record = self.parse_structured(
            response, schema, request=request, budget=budget, log=log
        )
        return record, response
