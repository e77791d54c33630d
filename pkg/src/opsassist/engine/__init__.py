from opsassist.engine.types import (
    EngineOptions,
    EvidenceRecord,
    FinalAnswer,
    IterationRecord,
    PlannerDecision,
    SolvingState,
    Trace,
)
from opsassist.engine.tools import ToolRegistry, ToolSpec, platform_tools
from opsassist.engine.loop import InvestigationEngine

__all__ = [
    "EngineOptions",
    "EvidenceRecord",
    "FinalAnswer",
    "InvestigationEngine",
    "IterationRecord",
    "PlannerDecision",
    "SolvingState",
    "ToolRegistry",
    "ToolSpec",
    "Trace",
    "platform_tools",
]
