"""Wires configuration and a data directory into a running assistant.

The data directory layout is plain files so fixtures are easy to author:

    kb/sop.jsonl              level-1 procedure store
    kb/internal-<name>.jsonl  level-2 document stores (one per file)
    web/*.txt                 offline web pages (url / title / body lines)
    platform/logs|metrics|configs/<id>.txt   tool fixtures
    transcripts/*.jsonl       canned chat responses for the replay provider
    agents.json               specialized-agent keyword registry
    background.txt            system background for the planner prompt
    cases.jsonl               resolved-ticket repository (quick answers)
    tickets.jsonl             escalated-ticket store
    escalations.jsonl         SOP drafts awaiting expert review
    cause_model.json          fitted cause-attribution model (optional)
    traces/                   immutable trace payloads written by the service

Everything is injectable for tests; the builders only fill in what the
caller leaves out.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from opsassist.config import AppConfig, ProviderConfig
from opsassist.engine import InvestigationEngine, ToolRegistry, platform_tools
from opsassist.kb import KnowledgeHierarchy, KnowledgeStore, Level
from opsassist.kb.web import DirectoryWebProvider, WebSearchProvider
from opsassist.llm import (
    Budget,
    ChatProvider,
    Embedder,
    HashingEmbedder,
    HttpChatProvider,
    LLMGateway,
    ReplayProvider,
)
from opsassist.pipeline import AgentRegistry, AgentSpec, AssistantPipeline, SessionStore
from opsassist.sopgen import EscalationQueue, SopExtractor
from opsassist.tickets import CaseRepository, CauseModel, TicketStore, model_from_dict


@dataclass
class Runtime:
    """Everything a frontend (HTTP service, CLI, tests) needs, assembled."""

    config: AppConfig
    data_dir: Path
    gateway: LLMGateway
    hierarchy: KnowledgeHierarchy
    tools: ToolRegistry
    engine: InvestigationEngine
    agents: AgentRegistry
    sessions: SessionStore
    case_repo: CaseRepository
    pipeline: AssistantPipeline
    tickets: TicketStore
    escalations: EscalationQueue
    extractor: SopExtractor
    cause_model: CauseModel | None = None
    internal_stores: tuple[KnowledgeStore, ...] = field(default=())

    @property
    def sop_store(self) -> KnowledgeStore:
        store = self.hierarchy.sop_store
        if store is None:
            raise RuntimeError("runtime built without a procedure store")
        return store

    def new_budget(self) -> Budget:
        return Budget(
            max_chat_calls=self.config.engine.max_chat_calls,
            max_total_tokens=self.config.engine.max_total_tokens,
        )

    def store_for_level(self, level: int) -> Sequence[KnowledgeStore]:
        if level == Level.SOP:
            return (self.sop_store,)
        if level == Level.INTERNAL:
            return self.internal_stores
        return ()


def build_provider(name: str, spec: ProviderConfig, data_dir: Path) -> ChatProvider:
    if spec.kind == "replay":
        paths = [_resolve(p, data_dir) for p in spec.transcript_paths]
        if not paths:
            paths = sorted((data_dir / "transcripts").glob("*.jsonl"))
        return ReplayProvider(paths, provider_id=name)
    if spec.kind == "http":
        if not spec.endpoint:
            raise ValueError(f"provider {name!r} is http but has no endpoint")
        return HttpChatProvider(
            endpoint=spec.endpoint,
            model=spec.model,
            api_key=spec.api_key,
            timeout_s=spec.timeout_s,
            provider_id=name,
        )
    raise ValueError(f"provider {name!r} has unknown kind {spec.kind!r}")


def _resolve(path: str | Path, base: Path) -> Path:
    p = Path(path)
    return p if p.is_absolute() else base / p


def _load_agents(path: Path) -> list[AgentSpec]:
    if not path.exists():
        return []
    raw = json.loads(path.read_text(encoding="utf-8"))
    specs: list[AgentSpec] = []
    for row in raw:
        specs.append(
            AgentSpec(
                name=str(row["name"]),
                keywords=tuple(str(k) for k in row.get("keywords", ())),
                description=str(row.get("description", "")),
            )
        )
    return specs


def build_runtime(
    config: AppConfig | None = None,
    *,
    providers: Mapping[str, ChatProvider] | None = None,
    embedder: Embedder | None = None,
    web_provider: WebSearchProvider | None = None,
    agents: Sequence[AgentSpec] | None = None,
    tools: ToolRegistry | None = None,
) -> Runtime:
    config = config or AppConfig()
    data_dir = Path(config.data_dir)
    embedder = embedder or HashingEmbedder(config.llm.embedding_dimension)

    if providers is None:
        if config.llm.providers:
            providers = {
                name: build_provider(name, spec, data_dir)
                for name, spec in config.llm.providers.items()
            }
        else:
            transcripts = sorted((data_dir / "transcripts").glob("*.jsonl"))
            providers = {
                config.llm.default_provider: ReplayProvider(
                    transcripts, provider_id=config.llm.default_provider
                )
            }
    gateway = LLMGateway(
        providers,
        embedder,
        default_provider=config.llm.default_provider,
        stage_providers=config.llm.stage_providers,
        max_concurrency=config.llm.max_concurrency,
    )

    kb_dir = data_dir / "kb"
    kb_dir.mkdir(parents=True, exist_ok=True)
    sop_store = KnowledgeStore(
        kb_dir / "sop.jsonl",
        base_id="sop",
        level=Level.SOP,
        embedder=embedder,
        description="validated operating procedures",
        id_prefix="sop",
    )
    internal_stores = []
    for path in sorted(kb_dir.glob("internal-*.jsonl")):
        base_id = path.stem.removeprefix("internal-")
        internal_stores.append(
            KnowledgeStore(
                path,
                base_id=base_id,
                level=Level.INTERNAL,
                embedder=embedder,
                description=f"internal documents: {base_id}",
                id_prefix=base_id,
            )
        )

    if web_provider is None:
        web_dir = data_dir / "web"
        if web_dir.is_dir():
            web_provider = DirectoryWebProvider(web_dir)
    hierarchy = KnowledgeHierarchy(
        sop_store,
        internal_stores,
        web_provider,
        embedder=embedder,
        retrieval=config.retrieval,
    )

    if tools is None:
        tools = platform_tools(data_dir / "platform")
    background_path = data_dir / "background.txt"
    background = (
        background_path.read_text(encoding="utf-8").strip()
        if background_path.exists()
        else ""
    )
    engine = InvestigationEngine(
        gateway,
        hierarchy,
        tools,
        engine_config=config.engine,
        retrieval_config=config.retrieval,
        background=background,
        fallback_text=config.pipeline.safe_response,
    )

    if agents is None:
        agents = _load_agents(data_dir / "agents.json")
    registry = AgentRegistry(agents, embedder)
    sessions = SessionStore()
    case_repo = CaseRepository.from_jsonl(data_dir / "cases.jsonl", embedder)
    pipeline = AssistantPipeline(
        gateway,
        engine,
        registry,
        sessions,
        case_repo,
        pipeline_config=config.pipeline,
        engine_config=config.engine,
        retrieval_config=config.retrieval,
    )

    tickets = TicketStore(data_dir / "tickets.jsonl")
    escalations = EscalationQueue(data_dir / "escalations.jsonl")
    extractor = SopExtractor(
        gateway,
        sop_store,
        config=config.sopgen,
        retrieval=config.retrieval,
        escalations=escalations,
    )

    cause_model = None
    model_path = data_dir / "cause_model.json"
    if model_path.exists():
        cause_model = model_from_dict(json.loads(model_path.read_text(encoding="utf-8")))

    return Runtime(
        config=config,
        data_dir=data_dir,
        gateway=gateway,
        hierarchy=hierarchy,
        tools=tools,
        engine=engine,
        agents=registry,
        sessions=sessions,
        case_repo=case_repo,
        pipeline=pipeline,
        tickets=tickets,
        escalations=escalations,
        extractor=extractor,
        cause_model=cause_model,
        internal_stores=tuple(internal_stores),
    )
