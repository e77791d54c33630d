"""Application configuration: dataclasses with file + environment loading."""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import yaml

DEFAULT_CAUSES = (
    "missing_knowledge",
    "wrong_routing",
    "incomplete_clarification",
    "retrieval_miss",
    "reasoning_error",
    "tool_failure",
    "stale_knowledge",
    "permission_issue",
    "user_error",
)

DEFAULT_ACTION_VOCABULARY = (
    "debugging",
    "permission_grant",
    "handoff",
    "data_onboarding",
    "config_change",
    "schema_change",
    "resource_adjustment",
    "documentation_link",
    "bug_report",
)

SAFE_RESPONSE = (
    "I could not finish the investigation within the allotted search budget. "
    "Here is what was gathered so far; please escalate to an on-call engineer "
    "if the issue persists."
)

REFUSAL_RESPONSE = (
    "I'm the operations assistant for this platform, so I can only help with "
    "platform consultation and troubleshooting questions."
)


@dataclass(frozen=True)
class ProviderConfig:
    kind: str = "replay"  # replay | http
    endpoint: str = ""
    api_key: str = ""
    model: str = ""
    timeout_s: float = 30.0
    transcript_paths: tuple[str, ...] = ()


@dataclass(frozen=True)
class LLMConfig:
    temperature: float = 0.1
    top_p: float = 0.95
    max_tokens: int = 1024
    embedding_dimension: int = 64
    max_concurrency: int = 8
    default_provider: str = "default"
    # stage tag -> provider name; unlisted tags use default_provider
    stage_providers: Mapping[str, str] = field(default_factory=dict)
    providers: Mapping[str, ProviderConfig] = field(
        default_factory=lambda: {"default": ProviderConfig()}
    )


@dataclass(frozen=True)
class RetrievalConfig:
    coarse_size: int = 50
    loop_k: int = 5
    single_shot_k: int = 10
    rrf_constant: int = 60
    web_min_chars: int = 40
    web_max_results: int = 5
    snippet_chars: int = 2000


@dataclass(frozen=True)
class EngineConfig:
    max_iterations: int = 8
    max_chat_calls: int = 20
    max_total_tokens: int = 200_000
    observation_cap_bytes: int = 8192


@dataclass(frozen=True)
class PipelineConfig:
    route_threshold: float = 0.75
    quick_answer_threshold: float = 0.85
    max_followups: int = 3
    refusal_text: str = REFUSAL_RESPONSE
    safe_response: str = SAFE_RESPONSE
    # request_type -> {"all": [...], "any": [[alternatives], ...]}
    required_fields: Mapping[str, Mapping[str, Any]] = field(
        default_factory=lambda: {
            "troubleshooting": {"all": ["symptom"], "any": [["error_log", "task_id"]]},
            "consultation": {"all": ["topic"], "any": []},
        }
    )
    followup_questions: Mapping[str, str] = field(
        default_factory=lambda: {
            "symptom": "Could you describe what failed or behaved unexpectedly?",
            "error_log": (
                "Could you paste the most relevant error log snippet "
                "(the first stack trace is usually enough)?"
            ),
            "task_id": "What is the task or job id of the failing run?",
            "topic": "Which component or feature is your question about?",
        }
    )


@dataclass(frozen=True)
class TicketConfig:
    causes: tuple[str, ...] = DEFAULT_CAUSES
    action_vocabulary: tuple[str, ...] = DEFAULT_ACTION_VOCABULARY
    assign_threshold: float = 0.8
    smoothing_alpha: float = 1.0
    # optional expert priors overriding empirical fit, cause -> probability
    expert_priors: Mapping[str, float] | None = None


@dataclass(frozen=True)
class SopGenConfig:
    generation_runs: int = 3
    stability_threshold: int = 2
    similar_breadth: int = 3


@dataclass(frozen=True)
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8710
    bearer_token: str = ""
    categorize_async: bool = True
    # static chat UI bundle; mounted only when the directory exists
    frontend_dir: str = "frontend/dist"


@dataclass(frozen=True)
class AppConfig:
    data_dir: str = "data"
    llm: LLMConfig = field(default_factory=LLMConfig)
    retrieval: RetrievalConfig = field(default_factory=RetrievalConfig)
    engine: EngineConfig = field(default_factory=EngineConfig)
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    tickets: TicketConfig = field(default_factory=TicketConfig)
    sopgen: SopGenConfig = field(default_factory=SopGenConfig)
    service: ServiceConfig = field(default_factory=ServiceConfig)


def _build(cls, data: Mapping[str, Any]):
    kwargs: dict[str, Any] = {}
    fields = {f.name: f for f in dataclasses.fields(cls)}
    for key, value in data.items():
        if key not in fields:
            raise ValueError(f"unknown config key {key!r} for {cls.__name__}")
        f = fields[key]
        if dataclasses.is_dataclass(f.type) or f.name in _NESTED.get(cls, {}):
            value = _build(_NESTED[cls][f.name], value)
        elif f.name == "providers":
            value = {name: _build(ProviderConfig, pd) for name, pd in value.items()}
        elif isinstance(value, list):
            value = tuple(tuple(v) if isinstance(v, list) else v for v in value)
        kwargs[key] = value
    return cls(**kwargs)


_NESTED: dict[type, dict[str, type]] = {
    AppConfig: {
        "llm": LLMConfig,
        "retrieval": RetrievalConfig,
        "engine": EngineConfig,
        "pipeline": PipelineConfig,
        "tickets": TicketConfig,
        "sopgen": SopGenConfig,
        "service": ServiceConfig,
    },
}


def load_config(path: str | Path | None = None, env: Mapping[str, str] | None = None) -> AppConfig:
    """Load config from a YAML/JSON file, then apply environment overrides."""
    env = os.environ if env is None else env
    data: dict[str, Any] = {}
    if path is not None:
        raw = Path(path).read_text(encoding="utf-8")
        data = (json.loads(raw) if str(path).endswith(".json") else yaml.safe_load(raw)) or {}
    cfg = _build(AppConfig, data)

    # Environment overrides for deployment-varying settings.
    svc = cfg.service
    if "OPSASSIST_HOST" in env:
        svc = dataclasses.replace(svc, host=env["OPSASSIST_HOST"])
    if "OPSASSIST_PORT" in env:
        svc = dataclasses.replace(svc, port=int(env["OPSASSIST_PORT"]))
    if "OPSASSIST_BEARER_TOKEN" in env:
        svc = dataclasses.replace(svc, bearer_token=env["OPSASSIST_BEARER_TOKEN"])
    providers = dict(cfg.llm.providers)
    name = cfg.llm.default_provider
    if name in providers:
        prov = providers[name]
        if "OPSASSIST_LLM_ENDPOINT" in env:
            prov = dataclasses.replace(prov, endpoint=env["OPSASSIST_LLM_ENDPOINT"])
        if "OPSASSIST_LLM_API_KEY" in env:
            prov = dataclasses.replace(prov, api_key=env["OPSASSIST_LLM_API_KEY"])
        if "OPSASSIST_LLM_MODEL" in env:
            prov = dataclasses.replace(prov, model=env["OPSASSIST_LLM_MODEL"])
        providers[name] = prov
    llm = dataclasses.replace(cfg.llm, providers=providers)
    if "OPSASSIST_DATA_DIR" in env:
        cfg = dataclasses.replace(cfg, data_dir=env["OPSASSIST_DATA_DIR"])
    return dataclasses.replace(cfg, llm=llm, service=svc)
