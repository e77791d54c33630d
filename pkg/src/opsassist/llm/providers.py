"""Chat and embedding providers.

ReplayProvider answers from recorded transcripts and is the only provider the
test suite depends on at runtime. ScriptedProvider is a rule-based stand-in
used to author transcripts; RecordingProvider captures any provider's answers
into transcript files. HttpChatProvider speaks an OpenAI-style wire format.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Mapping, Protocol, Sequence

import httpx

from opsassist.errors import ProviderUnavailable, ReplayMiss, TransportTimeout
from opsassist.llm.fingerprint import canonical_prompt, fingerprint
from opsassist.llm.types import ChatRequest, ChatResponse, EmbeddingVector, estimate_tokens
from opsassist.textutil import tokenize


class ChatProvider(Protocol):
    provider_id: str

    def chat(self, request: ChatRequest) -> ChatResponse: ...


class Embedder(Protocol):
    version: str
    dimension: int

    def embed(self, texts: Sequence[str]) -> list[EmbeddingVector]: ...


# ---------------------------------------------------------------- transcripts


def load_transcript(path: str | Path) -> dict[str, str]:
    """Read one transcript file; duplicate fingerprints are an authoring bug."""
    table: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: bad JSON: {exc}") from exc
            fp = row.get("fingerprint")
            canned = row.get("canned_response")
            if not isinstance(fp, str) or not isinstance(canned, str):
                raise ValueError(
                    f"{path}:{lineno}: fingerprint and canned_response must be strings"
                )
            if fp in table and table[fp] != canned:
                raise ValueError(f"{path}:{lineno}: conflicting entry for fingerprint {fp}")
            table[fp] = canned
    return table


def write_transcript(path: str | Path, entries: Mapping[str, str]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=str(path.parent), suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            for fp in sorted(entries):
                fh.write(
                    json.dumps(
                        {"fingerprint": fp, "canned_response": entries[fp]},
                        ensure_ascii=False,
                    )
                )
                fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class ReplayProvider:
    """Deterministic provider that replays recorded responses by fingerprint."""

    def __init__(self, transcript_paths: Iterable[str | Path], provider_id: str = "replay"):
        self.provider_id = provider_id
        self._table: dict[str, str] = {}
        for path in transcript_paths:
            incoming = load_transcript(path)
            for fp, canned in incoming.items():
                if fp in self._table and self._table[fp] != canned:
                    raise ValueError(f"{path}: conflicting entry for fingerprint {fp}")
                self._table[fp] = canned

    def __len__(self) -> int:
        return len(self._table)

    def chat(self, request: ChatRequest) -> ChatResponse:
        fp = fingerprint(request.tag, request.messages)
        if fp not in self._table:
            preview = canonical_prompt(request.tag, request.messages)[:400]
            raise ReplayMiss(fp, request.tag, preview)
        text = self._table[fp]
        prompt_chars = sum(len(m.text) for m in request.messages)
        return ChatResponse(
            text=text,
            token_usage=(estimate_tokens(" " * prompt_chars), estimate_tokens(text)),
            provider_id=self.provider_id,
        )


# ------------------------------------------------------------ scripted/record


@dataclass(frozen=True)
class Rule:
    """Maps prompts containing a substring (within a stage tag) to a reply."""

    contains: str
    response: str | Callable[[ChatRequest], str]
    tag: str | None = None

    def matches(self, request: ChatRequest, canonical: str) -> bool:
        if self.tag is not None and self.tag != request.tag:
            return False
        return self.contains in canonical

    def render(self, request: ChatRequest) -> str:
        if callable(self.response):
            return self.response(request)
        return self.response


class ScriptMiss(LookupError):
    pass


class ScriptedProvider:
    """Rule-driven provider used to author replay transcripts."""

    def __init__(self, rules: Sequence[Rule], provider_id: str = "scripted"):
        self.provider_id = provider_id
        self._rules = list(rules)

    def chat(self, request: ChatRequest) -> ChatResponse:
        canonical = canonical_prompt(request.tag, request.messages)
        for rule in self._rules:
            if rule.matches(request, canonical):
                text = rule.render(request)
                return ChatResponse(
                    text=text,
                    token_usage=(estimate_tokens(canonical), estimate_tokens(text)),
                    provider_id=self.provider_id,
                )
        raise ScriptMiss(
            f"no rule matched tag={request.tag!r} prompt starting: {canonical[:300]!r}"
        )


class RecordingProvider:
    """Wraps another provider and captures its answers keyed by fingerprint."""

    def __init__(self, inner: ChatProvider, provider_id: str = "recording"):
        self.provider_id = provider_id
        self._inner = inner
        self._captured: dict[str, str] = {}

    def chat(self, request: ChatRequest) -> ChatResponse:
        response = self._inner.chat(request)
        fp = fingerprint(request.tag, request.messages)
        if fp in self._captured and self._captured[fp] != response.text:
            raise ValueError(
                f"fingerprint collision with diverging responses for tag {request.tag!r}"
            )
        self._captured[fp] = response.text
        return response

    @property
    def captured(self) -> dict[str, str]:
        return dict(self._captured)

    def write(self, path: str | Path) -> int:
        write_transcript(path, self._captured)
        return len(self._captured)


# ------------------------------------------------------------------ live HTTP


class HttpChatProvider:
    """OpenAI-style chat completions over HTTP."""

    def __init__(
        self,
        endpoint: str,
        model: str,
        api_key: str = "",
        timeout_s: float = 60.0,
        provider_id: str = "http",
        transport: httpx.BaseTransport | None = None,
    ):
        self.provider_id = provider_id
        self._endpoint = endpoint.rstrip("/")
        self._model = model
        headers = {"Content-Type": "application/json"}
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        self._client = httpx.Client(
            timeout=timeout_s, headers=headers, transport=transport
        )

    def chat(self, request: ChatRequest) -> ChatResponse:
        body = {
            "model": self._model,
            "messages": [{"role": m.role, "content": m.text} for m in request.messages],
            "temperature": request.temperature,
            "top_p": request.top_p,
            "max_tokens": request.max_tokens,
        }
        try:
            reply = self._client.post(f"{self._endpoint}/chat/completions", json=body)
        except httpx.TimeoutException as exc:
            raise TransportTimeout(f"chat call timed out: {exc}") from exc
        except httpx.HTTPError as exc:
            raise ProviderUnavailable(f"chat transport failed: {exc}") from exc
        if reply.status_code != 200:
            raise ProviderUnavailable(
                f"chat endpoint returned {reply.status_code}: {reply.text[:200]}"
            )
        try:
            payload = reply.json()
            text = payload["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise ProviderUnavailable(f"malformed chat payload: {exc}") from exc
        usage = payload.get("usage") or {}
        prompt_tokens = int(usage.get("prompt_tokens") or 0)
        completion_tokens = int(usage.get("completion_tokens") or 0)
        if prompt_tokens == 0 and completion_tokens == 0:
            prompt_tokens = estimate_tokens(
                " ".join(m.text for m in request.messages)
            )
            completion_tokens = estimate_tokens(text)
        return ChatResponse(
            text=text,
            token_usage=(prompt_tokens, completion_tokens),
            provider_id=self.provider_id,
        )

    def close(self) -> None:
        self._client.close()


# ------------------------------------------------------------------ embedders


class HashingEmbedder:
    """Deterministic local embedder via token feature hashing.

    Identical texts embed to identical unit vectors, which the retrieval
    tests rely on; it is not a semantic model.
    """

    def __init__(self, dimension: int = 64):
        if dimension < 8:
            raise ValueError("embedding dimension too small")
        self.dimension = dimension
        self.version = f"hash-v1-d{dimension}"

    def _bucket(self, token: str) -> int:
        digest = hashlib.sha256(token.encode("utf-8")).digest()
        return int.from_bytes(digest[:8], "big") % self.dimension

    def embed(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        out: list[EmbeddingVector] = []
        for text in texts:
            counts = [0.0] * self.dimension
            tokens = tokenize(text)
            if not tokens:
                tokens = [text.strip() or "empty"]
            for token in tokens:
                counts[self._bucket(token)] += 1.0
            norm = sum(c * c for c in counts) ** 0.5
            out.append(EmbeddingVector(tuple(c / norm for c in counts)))
        return out


class HttpEmbedder:
    """OpenAI-style embeddings endpoint."""

    def __init__(
        self,
        endpoint: str,
        model: str,
        dimension: int,
        api_key: str = "",
        timeout_s: float = 60.0,
        transport: httpx.BaseTransport | None = None,
    ):
        self._endpoint = endpoint.rstrip("/")
        self._model = model
        self.dimension = dimension
        self.version = f"http-{model}-d{dimension}"
        headers = {"Content-Type": "application/json"}
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        self._client = httpx.Client(timeout=timeout_s, headers=headers, transport=transport)

    def embed(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        try:
            reply = self._client.post(
                f"{self._endpoint}/embeddings",
                json={"model": self._model, "input": list(texts)},
            )
        except httpx.TimeoutException as exc:
            raise TransportTimeout(f"embedding call timed out: {exc}") from exc
        except httpx.HTTPError as exc:
            raise ProviderUnavailable(f"embedding transport failed: {exc}") from exc
        if reply.status_code != 200:
            raise ProviderUnavailable(
                f"embedding endpoint returned {reply.status_code}: {reply.text[:200]}"
            )
        try:
            rows = reply.json()["data"]
            vectors = [EmbeddingVector(tuple(float(v) for v in row["embedding"])) for row in rows]
        except (KeyError, TypeError, ValueError) as exc:
            raise ProviderUnavailable(f"malformed embedding payload: {exc}") from exc
        for vec in vectors:
            if vec.dimension != self.dimension:
                from opsassist.errors import DimensionMismatch

                raise DimensionMismatch(
                    f"embedding dimension {vec.dimension}, expected {self.dimension}"
                )
        return vectors

    def close(self) -> None:
        self._client.close()
