from .config import ServiceConfig, load_config, make_backend, parse_config_text
from .pipeline import (
    MaskRecord,
    PipelineResult,
    PredictionSet,
    StudyStatus,
    TriageClass,
    dump_record,
    finding_refs,
    prediction_to_dict,
    result_to_record,
    run_pipeline,
    study_key,
    triage_class,
)
from .store import BlobStore, CorruptLog, EventLog, SnapshotStore
from .worklist import (
    ALLOWED_TRANSITIONS,
    BadRequest,
    IllegalTransition,
    Registry,
    StateViolation,
    StudyRecord,
    UnknownFinding,
    UnknownStudy,
)

__all__ = [
    "ALLOWED_TRANSITIONS",
    "BadRequest",
    "BlobStore",
    "CorruptLog",
    "EventLog",
    "IllegalTransition",
    "MaskRecord",
    "PipelineResult",
    "PredictionSet",
    "Registry",
    "ServiceConfig",
    "SnapshotStore",
    "StateViolation",
    "StudyRecord",
    "StudyStatus",
    "TriageClass",
    "UnknownFinding",
    "UnknownStudy",
    "dump_record",
    "finding_refs",
    "load_config",
    "make_backend",
    "parse_config_text",
    "prediction_to_dict",
    "result_to_record",
    "run_pipeline",
    "study_key",
    "triage_class",
]
