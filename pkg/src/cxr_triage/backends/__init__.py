"""Inference backends and the backend-independent decision ops."""
from .base import (
    ENSEMBLE_ARITY,
    SUPPORTED_RESOLUTIONS,
    ArityMismatch,
    BackendUnavailable,
    Decision,
    InvalidProbability,
    KeypointsNotFound,
    ModelBackend,
    ProbabilityVector,
    SanityVerdict,
    UnsupportedResolution,
    decide,
    ensemble_average,
)
from .fixture import FixtureBackend, RecordingBackend
from .tiny import TinyReferenceBackend

__all__ = [
    "ENSEMBLE_ARITY",
    "SUPPORTED_RESOLUTIONS",
    "ArityMismatch",
    "BackendUnavailable",
    "Decision",
    "FixtureBackend",
    "InvalidProbability",
    "KeypointsNotFound",
    "ModelBackend",
    "ProbabilityVector",
    "RecordingBackend",
    "SanityVerdict",
    "TinyReferenceBackend",
    "UnsupportedResolution",
    "decide",
    "ensemble_average",
]
