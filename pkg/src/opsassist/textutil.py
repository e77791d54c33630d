"""Small text helpers used across retrieval, fingerprinting, and traces."""

from __future__ import annotations

import json
import re
from typing import Any

_WS = re.compile(r"\s+")
_TOKEN = re.compile(r"[a-z0-9_]+")

# Volatile content scrubbed before fingerprinting so transcripts survive
# re-runs: ISO timestamps and uuid-style ids.
_TIMESTAMP = re.compile(
    r"\d{4}-\d{2}-\d{2}[T ]\d{2}:\d{2}:\d{2}(?:\.\d+)?(?:Z|[+-]\d{2}:?\d{2})?"
)
_UUID = re.compile(r"\b[0-9a-f]{8}-[0-9a-f]{4}-[0-9a-f]{4}-[0-9a-f]{4}-[0-9a-f]{12}\b")


def collapse_ws(text: str) -> str:
    return _WS.sub(" ", text).strip()


def scrub_volatile(text: str) -> str:
    text = _TIMESTAMP.sub("<timestamp>", text)
    return _UUID.sub("<id>", text)


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


def normalize_label(text: str) -> str:
    """Normalization used for benchmark label matching."""
    return collapse_ws(text.lower()).rstrip(".").strip()


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


_FENCE = re.compile(r"```[a-zA-Z0-9_-]*\n(.*?)```", re.DOTALL)


def extract_json_object(text: str) -> dict:
    """Pull the first JSON object out of model output.

    Tolerates prose around the object and fenced code blocks. Raises
    ValueError when no parseable object is found.
    """
    candidates = [text]
    candidates.extend(m.group(1) for m in _FENCE.finditer(text))
    for cand in candidates:
        cand = cand.strip()
        try:
            obj = json.loads(cand)
        except json.JSONDecodeError:
            obj = _scan_braces(cand)
        if isinstance(obj, dict):
            return obj
    raise ValueError("no JSON object found in output")


def _scan_braces(text: str) -> dict | None:
    start = text.find("{")
    while start != -1:
        depth = 0
        in_str = False
        escape = False
        for i in range(start, len(text)):
            ch = text[i]
            if in_str:
                if escape:
                    escape = False
                elif ch == "\\":
                    escape = True
                elif ch == '"':
                    in_str = False
                continue
            if ch == '"':
                in_str = True
            elif ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    try:
                        obj = json.loads(text[start : i + 1])
                    except json.JSONDecodeError:
                        break
                    if isinstance(obj, dict):
                        return obj
                    break
        start = text.find("{", start + 1)
    return None


def trim_repeated_blocks(text: str, window: int = 6) -> str:
    """Drop consecutive duplicated line blocks (pasted-twice stack traces)."""
    lines = text.splitlines()
    for size in range(window, 0, -1):
        out: list[str] = []
        i = 0
        while i < len(lines):
            block = lines[i : i + size]
            if len(block) == size and out[-size:] == block and any(s.strip() for s in block):
                i += size
                continue
            out.append(lines[i])
            i += 1
        lines = out
    return "\n".join(lines)


def truncate_middle(text: str, cap: int) -> str:
    """Head+tail truncation for oversized observations."""
    if len(text) <= cap:
        return text
    head = cap * 2 // 3
    tail = cap - head
    omitted = len(text) - head - tail
    return text[:head] + f"\n... [{omitted} chars omitted] ...\n" + text[-tail:]
