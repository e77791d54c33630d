from opsassist.pipeline.sessions import Session, SessionStore
from opsassist.pipeline.stages import AgentRegistry, AgentSpec, RoutingDecision
from opsassist.pipeline.runner import AssistantPipeline, TurnResult

__all__ = [
    "AgentRegistry",
    "AgentSpec",
    "AssistantPipeline",
    "RoutingDecision",
    "Session",
    "SessionStore",
    "TurnResult",
]
