"""Shared fixtures: replayable worlds with a pre-recorded transcript.

The scripted provider is exercised once per session; every scenario records
into a single transcript. Tests then replay against fresh world copies, so
they stay deterministic and independent of execution order.
"""

from __future__ import annotations

import itertools

import pytest

from opsassist import fixtures as fx


@pytest.fixture(scope="session")
def world_bundle(tmp_path_factory):
    root = tmp_path_factory.mktemp("worlds")
    main = fx.build_fixture_world(root / "main")
    noise = fx.build_fixture_world(root / "noise", noise=True)
    transcript = root / "scripted.jsonl"
    entries = fx.record_transcripts(main, noise, transcript, root / "recording")
    assert entries > 0
    return {"main": main, "noise": noise, "transcript": transcript}


@pytest.fixture()
def make_runtime(world_bundle, tmp_path):
    """Factory producing a fresh replay runtime per call."""
    counter = itertools.count(1)

    def make(*, noise: bool = False, configure=None):
        template = world_bundle["noise" if noise else "main"]
        dest = tmp_path / f"world{next(counter)}"
        return fx.replay_runtime(template, world_bundle["transcript"], dest, configure)

    return make
