"""Desk-scale chest X-ray triage: ingest, verification, classification,
detection, segmentation, evaluation, and a reviewable worklist service."""

from .labels import (
    CANONICAL_LABELS,
    DEFAULT_CRITICAL_LABELS,
    UnknownPathology,
    canonical_index,
    is_known_label,
    resolve_label,
)

__version__ = "0.1.0"

__all__ = [
    "CANONICAL_LABELS",
    "DEFAULT_CRITICAL_LABELS",
    "UnknownPathology",
    "canonical_index",
    "is_known_label",
    "resolve_label",
    "__version__",
]
