"""Immutable trace storage for the HTTP service.

Each completed request gets exactly one trace. Payloads are serialized once,
written once, and returned verbatim afterwards, so two reads of the same id
are byte-identical.
"""

from __future__ import annotations

import os
import re
import threading
from pathlib import Path

from opsassist.errors import UnknownTrace
from opsassist.textutil import canonical_json

_TRACE_NAME = re.compile(r"^tr-(\d{4,})\.json$")


class TraceStore:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._next = 1
        for path in self.root.iterdir():
            m = _TRACE_NAME.match(path.name)
            if m:
                self._next = max(self._next, int(m.group(1)) + 1)

    def _path(self, trace_id: str) -> Path:
        return self.root / f"{trace_id}.json"

    def put(self, payload: dict) -> str:
        data = canonical_json(payload).encode("utf-8")
        with self._lock:
            trace_id = f"tr-{self._next:04d}"
            self._next += 1
            tmp = self._path(trace_id).with_suffix(".tmp")
            with open(tmp, "wb") as fh:
                fh.write(data)
            os.replace(tmp, self._path(trace_id))
        return trace_id

    def get_bytes(self, trace_id: str) -> bytes:
        path = self._path(trace_id)
        if not _TRACE_NAME.match(path.name) or not path.exists():
            raise UnknownTrace(f"no trace {trace_id!r}")
        return path.read_bytes()

    def ids(self) -> list[str]:
        out = []
        for path in sorted(self.root.iterdir()):
            if _TRACE_NAME.match(path.name):
                out.append(path.stem)
        return out
