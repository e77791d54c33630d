from opsassist.sopgen.types import (
    ExtractionReport,
    MergeOutcome,
    ReviewResult,
    ScreeningVerdict,
)
from opsassist.sopgen.escalation import EscalationQueue
from opsassist.sopgen.pipeline import SopExtractor

__all__ = [
    "EscalationQueue",
    "ExtractionReport",
    "MergeOutcome",
    "ReviewResult",
    "ScreeningVerdict",
    "SopExtractor",
]
