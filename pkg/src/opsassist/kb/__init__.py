from opsassist.kb.types import (
    Candidate,
    EvidenceItem,
    EvidenceSet,
    KnowledgeEntry,
    Level,
    Provenance,
    RetrievalQuery,
)
from opsassist.kb.sop import (
    InvestigationStep,
    Observation,
    ResolutionStep,
    RootCauseBranch,
    SOPRecord,
    sop_from_dict,
    sop_to_dict,
    validate_sop,
)
from opsassist.kb.store import KnowledgeStore
from opsassist.kb.retrieval import coarse_retrieve, rerank, retrieve
from opsassist.kb.hierarchy import KnowledgeHierarchy

__all__ = [
    "Candidate",
    "EvidenceItem",
    "EvidenceSet",
    "InvestigationStep",
    "KnowledgeEntry",
    "KnowledgeHierarchy",
    "KnowledgeStore",
    "Level",
    "Observation",
    "Provenance",
    "ResolutionStep",
    "RetrievalQuery",
    "RootCauseBranch",
    "SOPRecord",
    "coarse_retrieve",
    "rerank",
    "retrieve",
    "sop_from_dict",
    "sop_to_dict",
    "validate_sop",
]
