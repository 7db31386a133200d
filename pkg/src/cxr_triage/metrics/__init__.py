"""Evaluation metrics: agreement rates, intervals, AUC, matching, reports."""
from .agreement import (
    METRIC_NAMES,
    AgreementMetrics,
    ConfusionCounts,
    IntervalMethod,
    UndefinedMetric,
    agreement_metrics,
    clopper_pearson_interval,
    confidence_interval,
    confusion,
    metric_counts,
    wilson_interval,
)
from .matching import DEFAULT_MATCH_IOU, Annotation, MatchResult, match_detections
from .ranking import SingleClass, auc
from .records import (
    DIMENSIONS,
    EvalRecord,
    UnknownDimension,
    evaluate_files,
    evaluate_records,
    join_records,
    load_prediction_file,
    load_reference_file,
    subgroup_rows,
)
from .report import (
    ClassificationEntry,
    MetricRangeError,
    MetricReport,
    PathologyRow,
    SubgroupRow,
    render_report,
    report_to_dict,
)

__all__ = [
    "DEFAULT_MATCH_IOU",
    "DIMENSIONS",
    "METRIC_NAMES",
    "AgreementMetrics",
    "Annotation",
    "ClassificationEntry",
    "ConfusionCounts",
    "EvalRecord",
    "IntervalMethod",
    "MatchResult",
    "MetricRangeError",
    "MetricReport",
    "PathologyRow",
    "SingleClass",
    "SubgroupRow",
    "UndefinedMetric",
    "UnknownDimension",
    "agreement_metrics",
    "auc",
    "clopper_pearson_interval",
    "confidence_interval",
    "confusion",
    "evaluate_files",
    "evaluate_records",
    "join_records",
    "load_prediction_file",
    "load_reference_file",
    "match_detections",
    "metric_counts",
    "render_report",
    "report_to_dict",
    "subgroup_rows",
    "wilson_interval",
]
