"""Level-3 web lookup behind a narrow provider interface."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

from opsassist.kb.lexical import LexicalIndex


@dataclass(frozen=True)
class WebResult:
    url: str
    title: str
    text: str


class WebSearchProvider(Protocol):
    def search(self, query: str, max_results: int) -> list[WebResult]: ...


class StaticWebProvider:
    """Fixed result list, rank-filtered lexically; for tests and demos."""

    def __init__(self, results: Sequence[WebResult]):
        self._results = list(results)
        self._index = LexicalIndex([r.title + "\n" + r.text for r in self._results])

    def search(self, query: str, max_results: int) -> list[WebResult]:
        hits = self._index.top(query, max_results)
        return [self._results[i] for i, _ in hits]


class DirectoryWebProvider:
    """Serves pages from a directory of text files.

    Each file: first line is the URL, second the title, rest the body.
    """

    def __init__(self, root: str | Path):
        self._results: list[WebResult] = []
        root = Path(root)
        for path in sorted(root.glob("*.txt")):
            lines = path.read_text(encoding="utf-8").splitlines()
            if len(lines) < 2:
                continue
            self._results.append(
                WebResult(url=lines[0].strip(), title=lines[1].strip(), text="\n".join(lines[2:]).strip())
            )
        self._index = LexicalIndex([r.title + "\n" + r.text for r in self._results])

    def search(self, query: str, max_results: int) -> list[WebResult]:
        hits = self._index.top(query, max_results)
        return [self._results[i] for i, _ in hits]


def web_search(
    provider: WebSearchProvider | None,
    query: str,
    *,
    max_results: int = 5,
    min_chars: int = 40,
) -> tuple[list[WebResult], tuple[str, ...]]:
    """Run a provider defensively: failures degrade to empty plus a flag."""
    if provider is None:
        return [], ("web_unavailable",)
    try:
        raw = provider.search(query, max_results)
    except Exception:
        return [], ("web_unavailable",)
    kept: list[WebResult] = []
    seen: set[str] = set()
    dropped = False
    for result in raw:
        if result.url in seen:
            continue
        if len(result.text.strip()) < min_chars:
            dropped = True
            continue
        seen.add(result.url)
        kept.append(result)
        if len(kept) >= max_results:
            break
    flags = ("web_results_filtered",) if dropped else ()
    return kept, flags
