"""Web provider parsing and the defensive search wrapper."""

from __future__ import annotations

from opsassist.kb.web import (
    DirectoryWebProvider,
    StaticWebProvider,
    WebResult,
    web_search,
)

LONG = "useful body text that comfortably clears the minimum length filter"


def _page(url, title, text=LONG):
    return WebResult(url=url, title=title, text=text)


def test_directory_provider_parses_pages(tmp_path):
    (tmp_path / "a.txt").write_text(
        "https://docs.example.com/gc\nGC tuning guide\nbody line one\nbody line two\n"
    )
    (tmp_path / "broken.txt").write_text("only-a-url\n")
    provider = DirectoryWebProvider(tmp_path)
    results = provider.search("gc tuning guide", 5)
    assert len(results) == 1
    assert results[0].url == "https://docs.example.com/gc"
    assert results[0].title == "GC tuning guide"
    assert results[0].text == "body line one\nbody line two"


def test_static_provider_ranks_lexically():
    provider = StaticWebProvider(
        [
            _page("u1", "kafka consumer lag"),
            _page("u2", "jvm heap tuning"),
        ]
    )
    results = provider.search("jvm heap", 5)
    assert [r.url for r in results] == ["u2"]


def test_web_search_none_provider_flags_unavailable():
    results, flags = web_search(None, "anything")
    assert results == []
    assert flags == ("web_unavailable",)


def test_web_search_swallows_provider_errors():
    class Broken:
        def search(self, query, max_results):
            raise RuntimeError("network down")

    results, flags = web_search(Broken(), "q")
    assert results == []
    assert flags == ("web_unavailable",)


def test_web_search_dedupes_urls():
    class Doubled:
        def search(self, query, max_results):
            return [_page("same", "first"), _page("same", "second"), _page("other", "third")]

    results, flags = web_search(Doubled(), "q")
    assert [r.url for r in results] == ["same", "other"]
    assert flags == ()


def test_web_search_filters_thin_results_with_flag():
    class Thin:
        def search(self, query, max_results):
            return [_page("u1", "t", text="too short"), _page("u2", "t")]

    results, flags = web_search(Thin(), "q", min_chars=40)
    assert [r.url for r in results] == ["u2"]
    assert flags == ("web_results_filtered",)


def test_web_search_caps_results():
    class Many:
        def search(self, query, max_results):
            return [_page(f"u{i}", "t") for i in range(10)]

    results, _ = web_search(Many(), "q", max_results=3)
    assert len(results) == 3
