"""Staged triage pipeline: ingest gate, classification, detection, masks.

Stage order is fixed: parse -> anonymize -> verify X-ray -> identify chest
-> classify view -> landmarks -> rotation at native resolution -> three
resolutions -> per-resolution classification -> ensemble -> decision ->
(Abnormal only) detection, then per-detection segmentation. A failure at a
gate stage rejects the study with a machine-readable reason and nothing
downstream runs or is stored.

Everything here is a pure function of (bytes, backend, config): no clocks,
no randomness, so identical inputs serialize byte-identically.
"""
from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass, field

from ..backends.base import (
    BackendUnavailable,
    Decision,
    KeypointsNotFound,
    ModelBackend,
    ProbabilityVector,
    SanityVerdict,
    decide,
    ensemble_average,
)
from ..detection import Detection, ProposalMode, nms, select_top_proposals
from ..ingest import (
    DicomError,
    EmptyImage,
    Image8,
    MalformedElement,
    MissingMagic,
    MissingPixelData,
    StudyMetadata,
    UnsupportedBitDepth,
    UnsupportedTransferSyntax,
    anonymize,
    parse_dicom,
    to_eight_bit,
)
from ..preprocess import DegenerateKeypoints, apply_rotation, estimate_rotation, multi_resolution
from ..segmentation import Mask, binarize_mask, crop_with_margin, rle_encode, unet_forward
from .config import ServiceConfig


class StudyStatus(str, enum.Enum):
    RECEIVED = "Received"
    REJECTED = "Rejected"
    CLASSIFIED = "Classified"
    DETECTED = "Detected"
    AWAITING_REVIEW = "AwaitingReview"
    REVIEWED = "Reviewed"


class TriageClass(str, enum.Enum):
    CRITICAL = "Critical"
    ROUTINE = "Routine"


# Rejection reason codes (machine readable, stable).
REASON_MISSING_MAGIC = "missing_magic"
REASON_TRANSFER_SYNTAX = "unsupported_transfer_syntax"
REASON_MISSING_PIXELS = "missing_pixel_data"
REASON_MALFORMED = "malformed_element"
REASON_BAD_RASTER = "bad_raster"
REASON_NOT_XRAY = "not_xray"
REASON_NOT_CHEST = "not_chest"
REASON_BACKEND = "backend_unavailable"


@dataclass(frozen=True)
class MaskRecord:
    """A binarised mask in image coordinates (RLE over the crop window)."""

    finding_id: str
    label: str
    x: int
    y: int
    width: int
    height: int
    rle: tuple[int, ...]


@dataclass(frozen=True)
class PredictionSet:
    """Everything the pipeline asserts about one study."""

    study_id: str
    sanity: SanityVerdict
    rotation_applied: float
    ensemble: ProbabilityVector
    decision: Decision
    detections: tuple[Detection, ...]
    masks: tuple[MaskRecord, ...]
    triage: TriageClass

    def __post_init__(self) -> None:
        if self.decision is Decision.NORMAL and (self.detections or self.masks):
            raise ValueError("Normal studies carry no detections or masks")
        det_labels = [d.label for d in self.detections]
        for mask in self.masks:
            if mask.label not in det_labels:
                raise ValueError(f"mask label {mask.label!r} has no matching detection")


def finding_refs(pred: PredictionSet) -> list[str]:
    """Reviewable findings: the classification verdict plus each detection."""
    return ["classification"] + [f"det-{i}" for i in range(len(pred.detections))]


@dataclass(frozen=True)
class PipelineResult:
    study_id: str
    status: StudyStatus
    reason: str | None = None
    meta: StudyMetadata | None = None
    prediction: PredictionSet | None = None
    display_image: Image8 | None = None


def study_key(data: bytes) -> str:
    """Service-level study id: content digest of the uploaded bytes."""
    return "st-" + hashlib.sha256(data).hexdigest()[:32]


def triage_class(detections: tuple[Detection, ...], critical_labels: frozenset[str]) -> TriageClass:
    if any(d.label in critical_labels for d in detections):
        return TriageClass.CRITICAL
    return TriageClass.ROUTINE


def run_pipeline(data: bytes, backend: ModelBackend, cfg: ServiceConfig) -> PipelineResult:
    sid = study_key(data)

    try:
        meta, raw = parse_dicom(data)
    except MissingMagic:
        return PipelineResult(sid, StudyStatus.REJECTED, REASON_MISSING_MAGIC)
    except UnsupportedTransferSyntax:
        return PipelineResult(sid, StudyStatus.REJECTED, REASON_TRANSFER_SYNTAX)
    except MissingPixelData:
        return PipelineResult(sid, StudyStatus.REJECTED, REASON_MISSING_PIXELS)
    except (MalformedElement, DicomError):
        return PipelineResult(sid, StudyStatus.REJECTED, REASON_MALFORMED)

    meta = anonymize(meta, cfg.anonymize_salt)

    try:
        img = to_eight_bit(raw)
    except (EmptyImage, UnsupportedBitDepth):
        return PipelineResult(sid, StudyStatus.REJECTED, REASON_BAD_RASTER, meta=meta)

    try:
        return _run_model_stages(sid, meta, img, backend, cfg)
    except BackendUnavailable:
        return PipelineResult(sid, StudyStatus.REJECTED, REASON_BACKEND, meta=meta)


def _run_model_stages(
    sid: str, meta: StudyMetadata, img: Image8, backend: ModelBackend, cfg: ServiceConfig
) -> PipelineResult:
    is_xray, xray_score = backend.verify_xray(img)
    if not is_xray:
        return PipelineResult(sid, StudyStatus.REJECTED, REASON_NOT_XRAY, meta=meta)
    is_chest, chest_score = backend.identify_chest(img)
    if not is_chest:
        return PipelineResult(sid, StudyStatus.REJECTED, REASON_NOT_CHEST, meta=meta)
    view, view_score = backend.classify_view(img)
    sanity = SanityVerdict(
        is_xray=is_xray,
        xray_score=xray_score,
        is_chest=is_chest,
        chest_score=chest_score,
        view=view,
        view_score=view_score,
    )

    # Alignment is best effort: missing or degenerate landmarks mean no
    # rotation, not a rejection.
    rotation = 0.0
    try:
        rotation = estimate_rotation(backend.detect_keypoints(img))
    except (KeypointsNotFound, DegenerateKeypoints):
        rotation = 0.0
    corrected = apply_rotation(img, rotation) if rotation != 0.0 else img

    pyramid = multi_resolution(corrected, cfg.resolutions)
    members = [
        backend.classify_normal_abnormal(pyramid[res], res) for res in cfg.resolutions
    ]
    ensemble = ensemble_average(members)
    decision = decide(ensemble, cfg.decision_threshold)

    detections: tuple[Detection, ...] = ()
    masks: tuple[MaskRecord, ...] = ()
    if decision is Decision.ABNORMAL:
        proposals = backend.propose_detections(corrected)
        kept = nms(proposals, cfg.detection.nms_threshold)
        kept = select_top_proposals(kept, ProposalMode.INFER, cfg.detection)
        detections = tuple(d for d in kept if d.score >= cfg.detection.score_threshold)
        masks = tuple(_segment(corrected, i, det, cfg) for i, det in enumerate(detections))

    pred = PredictionSet(
        study_id=sid,
        sanity=sanity,
        rotation_applied=rotation,
        ensemble=ensemble,
        decision=decision,
        detections=detections,
        masks=masks,
        triage=triage_class(detections, cfg.critical_labels),
    )
    return PipelineResult(
        sid, StudyStatus.AWAITING_REVIEW, meta=meta, prediction=pred, display_image=corrected
    )


def _segment(img: Image8, index: int, det: Detection, cfg: ServiceConfig) -> MaskRecord:
    crop, (ox, oy) = crop_with_margin(img, det.bbox, cfg.segmentation.crop_margin)
    probs = unet_forward(crop, cfg.segmentation, seed=cfg.segmentation_seed)
    binary = binarize_mask(Mask(det.label, probs), cfg.segmentation.mask_threshold)
    return MaskRecord(
        finding_id=f"det-{index}",
        label=det.label,
        x=ox,
        y=oy,
        width=binary.width,
        height=binary.height,
        rle=tuple(rle_encode(binary.probs)),
    )


# --- canonical serialization -------------------------------------------------


def prediction_to_dict(pred: PredictionSet) -> dict:
    return {
        "study_id": pred.study_id,
        "sanity": {
            "is_xray": pred.sanity.is_xray,
            "xray_score": pred.sanity.xray_score,
            "is_chest": pred.sanity.is_chest,
            "chest_score": pred.sanity.chest_score,
            "view": pred.sanity.view.value,
            "view_score": pred.sanity.view_score,
        },
        "rotation_applied": pred.rotation_applied,
        "ensemble": list(pred.ensemble.probs),
        "decision": pred.decision.value,
        "triage": pred.triage.value,
        "detections": [
            {
                "label": d.label,
                "score": d.score,
                "x1": d.bbox.x1,
                "y1": d.bbox.y1,
                "x2": d.bbox.x2,
                "y2": d.bbox.y2,
            }
            for d in pred.detections
        ],
        "masks": [
            {
                "finding_id": m.finding_id,
                "label": m.label,
                "x": m.x,
                "y": m.y,
                "width": m.width,
                "height": m.height,
                "rle": list(m.rle),
            }
            for m in pred.masks
        ],
    }


def result_to_record(result: PipelineResult) -> dict:
    """Deterministic per-study record for `run` output (no wall-clock fields)."""
    rec: dict = {"study_id": result.study_id, "status": result.status.value}
    if result.reason:
        rec["reason"] = result.reason
    if result.prediction is not None:
        pred = prediction_to_dict(result.prediction)
        rec["decision"] = pred["decision"]
        rec["score"] = pred["ensemble"][1]
        rec["triage"] = pred["triage"]
        rec["rotation_applied"] = pred["rotation_applied"]
        rec["detections"] = pred["detections"]
        rec["masks"] = pred["masks"]
    if result.meta is not None:
        rec["attributes"] = {
            "age_band": _age_band_value(result.meta),
            "sex": result.meta.sex.value,
            "machine_type": result.meta.machine_type.value,
            "manufacturer": result.meta.manufacturer.value,
        }
    return rec


def _age_band_value(meta: StudyMetadata) -> str:
    from ..ingest.metadata import age_band

    if meta.patient_age_years is None:
        return "Unknown"
    return age_band(meta.patient_age_years).value


def dump_record(rec: dict) -> str:
    return json.dumps(rec, sort_keys=True, separators=(",", ":"))
