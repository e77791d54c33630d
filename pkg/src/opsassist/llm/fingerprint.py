"""Deterministic prompt fingerprints for the replay provider.

The fingerprint must survive incidental whitespace churn and volatile
substrings (timestamps, UUIDs), so both are normalized away before hashing.
"""

from __future__ import annotations

import hashlib
from typing import Iterable

from opsassist.llm.types import Message
from opsassist.textutil import collapse_ws, scrub_volatile

_SCHEME = "fp1"


def canonical_prompt(tag: str, messages: Iterable[Message]) -> str:
    parts = [tag]
    for msg in messages:
        parts.append(f"{msg.role}|{collapse_ws(scrub_volatile(msg.text))}")
    return "\n".join(parts)


def fingerprint(tag: str, messages: Iterable[Message]) -> str:
    payload = _SCHEME + "\n" + canonical_prompt(tag, messages)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()
