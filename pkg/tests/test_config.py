"""Config defaults, file loading, and environment overrides."""

import json

import pytest

from opsassist.config import AppConfig, load_config


def test_defaults():
    cfg = AppConfig()
    assert cfg.llm.embedding_dimension == 64
    assert cfg.llm.default_provider == "default"
    assert "default" in cfg.llm.providers
    assert cfg.retrieval.rrf_constant == 60
    assert cfg.retrieval.loop_k == 5
    assert cfg.engine.max_iterations == 8
    assert cfg.engine.max_chat_calls == 20
    assert cfg.engine.max_total_tokens == 200_000
    assert cfg.pipeline.route_threshold == 0.75
    assert cfg.tickets.assign_threshold == 0.8
    assert cfg.sopgen.generation_runs == 3
    assert cfg.sopgen.stability_threshold == 2


def test_load_config_without_file_gives_defaults():
    assert load_config(None, env={}) == AppConfig()


def test_load_config_from_yaml(tmp_path):
    path = tmp_path / "app.yaml"
    path.write_text(
        "\n".join(
            [
                "data_dir: /srv/assistant",
                "engine:",
                "  max_iterations: 4",
                "retrieval:",
                "  loop_k: 3",
                "tickets:",
                "  causes: [config_error, capacity]",
                "llm:",
                "  providers:",
                "    default:",
                "      kind: replay",
                "      transcript_paths: [a.jsonl, b.jsonl]",
            ]
        ),
        encoding="utf-8",
    )
    cfg = load_config(path, env={})
    assert cfg.data_dir == "/srv/assistant"
    assert cfg.engine.max_iterations == 4
    assert cfg.retrieval.loop_k == 3
    assert cfg.tickets.causes == ("config_error", "capacity")
    assert cfg.llm.providers["default"].transcript_paths == ("a.jsonl", "b.jsonl")
    # untouched sections keep their defaults
    assert cfg.pipeline.route_threshold == 0.75


def test_load_config_from_json(tmp_path):
    path = tmp_path / "app.json"
    path.write_text(json.dumps({"service": {"port": 9000}}), encoding="utf-8")
    cfg = load_config(path, env={})
    assert cfg.service.port == 9000


def test_unknown_key_rejected(tmp_path):
    path = tmp_path / "app.yaml"
    path.write_text("engine:\n  max_retries: 3\n", encoding="utf-8")
    with pytest.raises(ValueError, match="unknown config key"):
        load_config(path, env={})


def test_environment_overrides(tmp_path):
    path = tmp_path / "app.yaml"
    path.write_text("service:\n  port: 8000\n", encoding="utf-8")
    cfg = load_config(
        path,
        env={
            "OPSASSIST_HOST": "0.0.0.0",
            "OPSASSIST_PORT": "8443",
            "OPSASSIST_BEARER_TOKEN": "sekrit",
            "OPSASSIST_DATA_DIR": "/var/lib/assistant",
            "OPSASSIST_LLM_ENDPOINT": "http://llm.internal:8080",
        },
    )
    assert cfg.service.host == "0.0.0.0"
    assert cfg.service.port == 8443
    assert cfg.service.bearer_token == "sekrit"
    assert cfg.data_dir == "/var/lib/assistant"
    assert cfg.llm.providers["default"].endpoint == "http://llm.internal:8080"
