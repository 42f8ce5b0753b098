"""Equipment-selection copilot: catalog, retrieval, LLM gateway, orchestrator, service, eval."""

from equipcopilot.catalog import (
    AnnotatedRecord,
    AttributeValue,
    Catalog,
    Comparator,
    ElementaryOperation,
    EquipmentClass,
    EquipmentRecord,
    Requirement,
    RequirementGroup,
    load_catalog,
    parse_catalog,
    satisfaction_ratio,
)
from equipcopilot.retrieval import (
    Chunk,
    ChunkingConfig,
    DeterministicEmbedder,
    RetrievalResult,
    VectorIndex,
    chunk_document,
    score,
)

__version__ = "0.1.0"

__all__ = [
    "AnnotatedRecord",
    "AttributeValue",
    "Catalog",
    "Chunk",
    "ChunkingConfig",
    "Comparator",
    "DeterministicEmbedder",
    "ElementaryOperation",
    "EquipmentClass",
    "EquipmentRecord",
    "Requirement",
    "RequirementGroup",
    "RetrievalResult",
    "VectorIndex",
    "chunk_document",
    "load_catalog",
    "parse_catalog",
    "satisfaction_ratio",
    "score",
    "__version__",
]
