"""Evaluation records: file formats, joining, and report computation.

Prediction files are the line-delimited output of the pipeline `run`
command; reference files carry the radiologist read plus subgroup
attributes. Records join on study_id.
"""
from __future__ import annotations

import json
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path

from ..backends.base import Decision
from ..detection import BBox, Detection
from ..ingest.metadata import AgeBand, MachineType, Manufacturer, Sex
from ..labels import CANONICAL_LABELS
from .agreement import (
    IntervalMethod,
    agreement_metrics,
    confidence_interval,
    confusion,
    metric_counts,
)
from .matching import DEFAULT_MATCH_IOU, Annotation, match_detections
from .ranking import SingleClass, auc
from .report import ClassificationEntry, MetricReport, PathologyRow, SubgroupRow

DIMENSIONS: dict[str, tuple[str, tuple[str, ...]]] = {
    "age": ("age_band", tuple(b.value for b in AgeBand)),
    "gender": ("sex", tuple(s.value for s in Sex)),
    "machine": ("machine_type", tuple(m.value for m in MachineType)),
    "manufacturer": ("manufacturer", tuple(m.value for m in Manufacturer)),
}


class UnknownDimension(KeyError):
    def __init__(self, name: str):
        super().__init__(f"unknown dimension {name!r}; choose from {sorted(DIMENSIONS)}")
        self.name = name


@dataclass
class EvalRecord:
    study_id: str
    predicted: Decision
    score: float
    detections: list[Detection] = field(default_factory=list)
    reference: Decision | None = None
    annotations: list[Annotation] = field(default_factory=list)
    attrs: dict[str, str] = field(default_factory=dict)


def _boxes_from(items: list[dict], with_score: bool) -> list:
    out = []
    for b in items:
        bbox = BBox(float(b["x1"]), float(b["y1"]), float(b["x2"]), float(b["y2"]))
        if with_score:
            out.append(Detection(bbox=bbox, label=str(b["label"]), score=float(b["score"])))
        else:
            out.append(Annotation(bbox=bbox, label=str(b["label"])))
    return out


def load_prediction_file(path: str | Path) -> dict[str, EvalRecord]:
    """Parse pipeline output lines into records keyed by study id.

    Rejected studies (no decision) are skipped; extra keys are ignored so
    the richer `run` output loads as-is.
    """
    records: dict[str, EvalRecord] = {}
    for i, line in enumerate(_lines(path)):
        rec = _parse_json_line(path, i, line)
        if rec.get("decision") not in (Decision.NORMAL.value, Decision.ABNORMAL.value):
            continue
        study_id = str(rec["study_id"])
        records[study_id] = EvalRecord(
            study_id=study_id,
            predicted=Decision(rec["decision"]),
            score=float(rec.get("score", 0.0)),
            detections=_boxes_from(rec.get("detections", []), with_score=True),
        )
    return records


def load_reference_file(path: str | Path) -> dict[str, dict]:
    refs: dict[str, dict] = {}
    for i, line in enumerate(_lines(path)):
        rec = _parse_json_line(path, i, line)
        refs[str(rec["study_id"])] = rec
    return refs


def _lines(path: str | Path):
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield line


def _parse_json_line(path: str | Path, index: int, line: str) -> dict:
    try:
        rec = json.loads(line)
    except json.JSONDecodeError as e:
        raise ValueError(f"{path}:{index + 1}: bad record: {e}") from e
    if "study_id" not in rec:
        raise ValueError(f"{path}:{index + 1}: record missing study_id")
    return rec


def join_records(
    predictions: dict[str, EvalRecord], references: dict[str, dict]
) -> tuple[list[EvalRecord], list[str]]:
    """Attach references to predictions; unmatched ids produce notices."""
    joined: list[EvalRecord] = []
    notices: list[str] = []
    for study_id, rec in sorted(predictions.items()):
        ref = references.get(study_id)
        if ref is None:
            notices.append(f"prediction {study_id} has no reference; skipped")
            continue
        rec.reference = Decision(ref["reference"])
        rec.annotations = _boxes_from(ref.get("annotations", []), with_score=False)
        rec.attrs = {
            k: str(ref[k])
            for k in ("age_band", "sex", "machine_type", "manufacturer")
            if k in ref
        }
        joined.append(rec)
    for study_id in sorted(set(references) - set(predictions)):
        notices.append(f"reference {study_id} has no prediction; skipped")
    return joined, notices


def _classification_block(
    records: list[EvalRecord], level: float, method: IntervalMethod
) -> dict[str, ClassificationEntry]:
    counts = confusion(
        (r.predicted is Decision.ABNORMAL, r.reference is Decision.ABNORMAL) for r in records
    )
    metrics = agreement_metrics(counts)
    block: dict[str, ClassificationEntry] = {}
    for name in ("ppv", "npv", "ppa", "npa"):
        value = getattr(metrics, name)
        if value is None:
            continue
        num, den = metric_counts(counts, name)
        lo, hi = confidence_interval(num, den, level, method)
        block[name] = ClassificationEntry(value=value, ci_lower=lo, ci_upper=hi)
    return block


def _pathology_rows(records: list[EvalRecord], iou_threshold: float) -> list[PathologyRow]:
    observed: set[str] = set()
    for r in records:
        observed.update(d.label for d in r.detections)
        observed.update(a.label for a in r.annotations)
    rows: list[PathologyRow] = []
    for label in CANONICAL_LABELS:
        if label not in observed:
            continue
        tp = fp = fn = 0
        scores: list[float] = []
        truths: list[int] = []
        for r in records:
            preds = [d for d in r.detections if d.label == label]
            refs = [a for a in r.annotations if a.label == label]
            m = match_detections(preds, refs, iou_threshold)
            tp += m.tp
            fp += m.fp
            fn += m.fn
            scores.append(max((d.score for d in preds), default=0.0))
            truths.append(1 if refs else 0)
        try:
            label_auc = auc(scores, truths)
        except SingleClass:
            label_auc = None
        precision = 100.0 * tp / (tp + fp) if tp + fp else None
        recall = 100.0 * tp / (tp + fn) if tp + fn else None
        rows.append(
            PathologyRow(label=label, auc=label_auc, precision_pct=precision, recall_pct=recall)
        )
    return rows


def subgroup_rows(
    records: list[EvalRecord], dimension: str
) -> tuple[list[SubgroupRow], list[str]]:
    """One row per group value along a dimension; empty groups are noticed."""
    if dimension not in DIMENSIONS:
        raise UnknownDimension(dimension)
    attr, domain = DIMENSIONS[dimension]
    by_group: dict[str, list[EvalRecord]] = {}
    for r in records:
        by_group.setdefault(r.attrs.get(attr, "Unknown"), []).append(r)

    rows: list[SubgroupRow] = []
    notices: list[str] = []
    seen = list(domain) + [g for g in sorted(by_group) if g not in domain]
    for group in seen:
        members = by_group.get(group, [])
        if not members:
            notices.append(f"subgroup {dimension}={group} omitted (no records)")
            continue
        counts = confusion(
            (r.predicted is Decision.ABNORMAL, r.reference is Decision.ABNORMAL)
            for r in members
        )
        metrics = agreement_metrics(counts)
        try:
            g_auc = auc(
                [r.score for r in members],
                [1 if r.reference is Decision.ABNORMAL else 0 for r in members],
            )
        except SingleClass:
            g_auc = None
        pct = lambda v: None if v is None else 100.0 * v
        accuracy = 100.0 * (counts.tp + counts.tn) / counts.total if counts.total else None
        rows.append(
            SubgroupRow(
                group=group,
                n=len(members),
                auc=g_auc,
                accuracy_pct=accuracy,
                precision_pct=pct(metrics.ppv),
                recall_pct=pct(metrics.ppa),
                sensitivity_pct=pct(metrics.ppa),
                specificity_pct=pct(metrics.npa),
            )
        )
    return rows, notices


def evaluate_records(
    records: list[EvalRecord],
    by: str | Sequence[str] | None = None,
    iou_threshold: float = DEFAULT_MATCH_IOU,
    level: float = 0.95,
    method: IntervalMethod = IntervalMethod.WILSON,
) -> MetricReport:
    """Full evaluation: classification agreement, per-pathology rows, subgroups."""
    report = MetricReport()
    if not records:
        report.notices.append("no joined records to evaluate")
        return report
    report.classification = _classification_block(records, level, method)
    report.pathology_rows = _pathology_rows(records, iou_threshold)
    dims = [by] if isinstance(by, str) else list(by or ())
    for dim in dims:
        rows, notices = subgroup_rows(records, dim)
        report.subgroups[dim] = rows
        report.notices.extend(notices)
    return report


def evaluate_files(
    pred_path: str | Path,
    ref_path: str | Path,
    by: str | Sequence[str] | None = None,
    iou_threshold: float = DEFAULT_MATCH_IOU,
    level: float = 0.95,
    method: IntervalMethod = IntervalMethod.WILSON,
) -> MetricReport:
    predictions = load_prediction_file(pred_path)
    references = load_reference_file(ref_path)
    records, notices = join_records(predictions, references)
    report = evaluate_records(records, by=by, iou_threshold=iou_threshold, level=level, method=method)
    report.notices.extend(notices)
    return report
