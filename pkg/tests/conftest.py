"""Shared corpus builders: synthetic DICOM studies plus authored fixture files
that pin every model-stage output, so pipeline tests are fully deterministic."""
from __future__ import annotations

import dataclasses
import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pytest

from cxr_triage.backends.fixture import (
    STAGE_CHEST,
    STAGE_DETECTIONS,
    STAGE_KEYPOINTS,
    STAGE_VERIFY,
    STAGE_VIEW,
    stage_classify,
)
from cxr_triage.ingest import (
    MachineType,
    Manufacturer,
    RawImage,
    Sex,
    StudyMetadata,
    ViewHint,
    parse_dicom,
    serialize_dicom,
)
from cxr_triage.ingest.image import Image8, image_digest, to_eight_bit
from cxr_triage.preprocess import apply_rotation, estimate_rotation, KeypointSet, multi_resolution
from cxr_triage.service import ServiceConfig, study_key

SEXES = (Sex.MALE, Sex.FEMALE)
MAKERS = (Manufacturer.GE, Manufacturer.SIEMENS, Manufacturer.PHILIPS, Manufacturer.OTHER)


def make_raw(seed: int, h: int = 96, w: int = 80, bits: int = 12) -> RawImage:
    """Smooth synthetic radiograph-ish content; varied enough per seed that
    every derived digest differs between studies."""
    rng = np.random.default_rng([seed, 0xA11CE])
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    cx, cy = w / 2 + rng.uniform(-8, 8), h / 2 + rng.uniform(-8, 8)
    r = np.hypot(xx - cx, yy - cy)
    base = 0.65 - 0.5 * (r / r.max()) ** 2
    base += 0.08 * np.sin(xx / (3.0 + seed % 5)) * np.cos(yy / 4.0)
    base += rng.normal(0.0, 0.02, size=(h, w))
    top = (1 << bits) - 1
    pixels = np.clip(np.rint(base * top), 0, top).astype(np.uint16)
    return RawImage(pixels=pixels, bits_stored=bits)


def make_meta(seed: int, **over) -> StudyMetadata:
    values = dict(
        study_id=f"1.2.826.0.1.{seed}",
        patient_age_years=(18 + (seed * 7) % 70),
        sex=SEXES[seed % 2],
        manufacturer=MAKERS[seed % 4],
        machine_type=(MachineType.CR, MachineType.DR)[seed % 2],
        modality=("CR", "DX")[seed % 2],
        view_hint=(ViewHint.PA, ViewHint.AP)[seed % 2],
        acquired_at=f"20240{1 + seed % 9}15T1{seed % 10}0000",
        identifiers={"name": f"PATIENT^{seed}", "id": f"MRN{seed:05d}"},
    )
    values.update(over)
    return StudyMetadata(**values)


def study_blob(seed: int, h: int = 96, w: int = 80, **meta_over) -> bytes:
    return serialize_dicom(make_meta(seed, **meta_over), make_raw(seed, h, w))


def flat_keypoints(img: Image8, tilt_deg: float = 0.0) -> KeypointSet:
    """Clavicle landmarks whose left-right line implies the given rotation."""
    h, w = img.pixels.shape
    cx, cy = w * 0.5, h * 0.25
    half = w * 0.2
    t = math.radians(tilt_deg)
    dx, dy = half * math.cos(t), half * math.sin(t)
    return KeypointSet(
        left_clavicle=(cx - dx, cy - dy),
        right_clavicle=(cx + dx, cy + dy),
        spine=((w * 0.5, h * 0.35), (w * 0.5, h * 0.55), (w * 0.5, h * 0.75)),
    )


def author_records(
    blob: bytes,
    *,
    xray: float = 0.93,
    chest: float = 0.88,
    view: str = "PA",
    view_score: float = 0.8,
    tilt_deg: float | None = 0.0,
    probs: tuple[float, float] = (0.9, 0.1),
    boxes: list[dict] | None = None,
    resolutions: tuple[int, ...] = (224, 320, 512),
) -> list[dict]:
    """Fixture records for one study, mirroring the pipeline's stage inputs.

    tilt_deg None means the landmark stage reports nothing found; the
    pipeline then skips rotation. Scores below 0.5 at the verify/chest
    stages author a rejection, in which case later stages are not needed
    but extra records are harmless.
    """
    _, raw = parse_dicom(blob)
    img = to_eight_bit(raw)
    d0 = image_digest(img)
    records = [
        {"digest": d0, "stage": STAGE_VERIFY, "output": {"score": xray}},
        {"digest": d0, "stage": STAGE_CHEST, "output": {"score": chest}},
        {"digest": d0, "stage": STAGE_VIEW, "output": {"view": view, "score": view_score}},
    ]
    if tilt_deg is None:
        records.append({"digest": d0, "stage": STAGE_KEYPOINTS, "output": {"found": False}})
        corrected = img
    else:
        kp = flat_keypoints(img, tilt_deg)
        records.append(
            {
                "digest": d0,
                "stage": STAGE_KEYPOINTS,
                "output": {
                    "found": True,
                    "left": list(kp.left_clavicle),
                    "right": list(kp.right_clavicle),
                    "spine": [list(p) for p in kp.spine],
                },
            }
        )
        rotation = estimate_rotation(kp)
        corrected = apply_rotation(img, rotation) if rotation != 0.0 else img
    for res, scaled in multi_resolution(corrected, resolutions).items():
        records.append(
            {"digest": image_digest(scaled), "stage": stage_classify(res), "output": {"probs": list(probs)}}
        )
    if boxes is not None:
        records.append(
            {"digest": image_digest(corrected), "stage": STAGE_DETECTIONS, "output": {"boxes": boxes}}
        )
    return records


def box(label: str, score: float, x1: float, y1: float, x2: float, y2: float) -> dict:
    return {"label": label, "score": score, "x1": x1, "y1": y1, "x2": x2, "y2": y2}


def break_magic(blob: bytes) -> bytes:
    return blob[:128] + b"XXXX" + blob[132:]


def swap_transfer_syntax(blob: bytes, uid: str = "1.2.840.10008.1.2") -> bytes:
    """Rewrite the stored transfer syntax UID, fixing up the element length."""
    old = "1.2.840.10008.1.2.1".encode() + b"\x00"
    idx = blob.index(old)
    value = uid.encode()
    if len(value) % 2:
        value += b"\x00"
    head = bytearray(blob[: idx - 8])
    head += struct.pack("<HH2sH", 0x0002, 0x0010, b"UI", len(value))
    head += value
    head += blob[idx + len(old):]
    return bytes(head)


@dataclass
class CorpusStudy:
    name: str
    blob: bytes
    expect_status: str
    expect_reason: str | None = None
    expect_decision: str | None = None
    expect_triage: str | None = None
    records: list[dict] = field(default_factory=list)

    @property
    def study_id(self) -> str:
        return study_key(self.blob)


@dataclass
class Corpus:
    dir: Path
    fixture_path: Path
    studies: list[CorpusStudy]
    config: ServiceConfig

    @property
    def files(self) -> list[Path]:
        return sorted(p for p in self.dir.iterdir() if p.suffix == ".dcm")

    def by_name(self, name: str) -> CorpusStudy:
        return next(s for s in self.studies if s.name == name)


def build_corpus(root: Path) -> Corpus:
    """Twenty studies spanning the pipeline's outcome space."""
    studies: list[CorpusStudy] = []

    def add(name, blob, status, reason=None, decision=None, triage=None, records=()):
        studies.append(
            CorpusStudy(
                name=name,
                blob=blob,
                expect_status=status,
                expect_reason=reason,
                expect_decision=decision,
                expect_triage=triage,
                records=list(records),
            )
        )

    normal = (0.9, 0.1)
    abnormal = (0.2, 0.8)

    # 7 straightforward abnormal studies with varied detections.
    critical_sets = [
        [box("Pneumothorax", 0.92, 8, 10, 40, 50)],
        [box("Pneumoperitoneum", 0.88, 12, 40, 44, 76), box("Atelectasis", 0.74, 30, 20, 62, 52)],
        [box("Hydro Pneumothorax", 0.83, 6, 8, 36, 44)],
    ]
    routine_sets = [
        [box("Consolidation", 0.81, 10, 16, 46, 58)],
        [box("Cardiomegaly", 0.9, 14, 40, 66, 82), box("Cardiomegaly", 0.55, 15, 41, 67, 83)],
        [box("Pleural Effusion", 0.77, 8, 50, 40, 86), box("Nodule", 0.64, 48, 18, 64, 34)],
        [box("Fibrosis", 0.71, 20, 20, 52, 56), box("Fibrosis", 0.31, 5, 5, 20, 20)],
    ]
    for i, boxes in enumerate(critical_sets):
        blob = study_blob(seed=100 + i)
        add(
            f"abnormal-critical-{i}",
            blob,
            "AwaitingReview",
            decision="Abnormal",
            triage="Critical",
            records=author_records(blob, probs=abnormal, boxes=boxes),
        )
    for i, boxes in enumerate(routine_sets):
        blob = study_blob(seed=110 + i)
        add(
            f"abnormal-routine-{i}",
            blob,
            "AwaitingReview",
            decision="Abnormal",
            triage="Routine",
            records=author_records(blob, probs=abnormal, boxes=boxes),
        )

    # 5 normal studies (one with the decision exactly at threshold stays
    # abnormal, so keep all five strictly below it).
    for i in range(5):
        blob = study_blob(seed=120 + i)
        add(
            f"normal-{i}",
            blob,
            "AwaitingReview",
            decision="Normal",
            triage="Routine",
            records=author_records(blob, probs=normal),
        )

    # 2 tilted abnormal studies exercise the alignment stage.
    for i, tilt in enumerate((5.0, -8.0)):
        blob = study_blob(seed=130 + i)
        add(
            f"abnormal-tilted-{i}",
            blob,
            "AwaitingReview",
            decision="Abnormal",
            triage="Routine",
            records=author_records(
                blob,
                tilt_deg=tilt,
                probs=abnormal,
                boxes=[box("Pleural Thickening", 0.69, 16, 12, 48, 46)],
            ),
        )

    # 1 study where landmarks are not found: processed without rotation.
    blob = study_blob(seed=140)
    add(
        "no-landmarks",
        blob,
        "AwaitingReview",
        decision="Normal",
        triage="Routine",
        records=author_records(blob, tilt_deg=None, probs=normal),
    )

    # 5 rejections, one per reason the corpus can reach.
    add("reject-magic", break_magic(study_blob(seed=150)), "Rejected", reason="missing_magic")
    add("reject-truncated", study_blob(seed=151)[:200], "Rejected", reason="malformed_element")
    add(
        "reject-syntax",
        swap_transfer_syntax(study_blob(seed=152)),
        "Rejected",
        reason="unsupported_transfer_syntax",
    )
    blob = study_blob(seed=153)
    add(
        "reject-not-xray",
        blob,
        "Rejected",
        reason="not_xray",
        records=author_records(blob, xray=0.12),
    )
    blob = study_blob(seed=154)
    add(
        "reject-not-chest",
        blob,
        "Rejected",
        reason="not_chest",
        records=author_records(blob, chest=0.22),
    )

    assert len(studies) == 20
    root.mkdir(parents=True, exist_ok=True)
    for i, st in enumerate(studies):
        (root / f"study_{i:02d}_{st.name}.dcm").write_bytes(st.blob)
    fixture_path = root / "fixture.ndjson"
    with open(fixture_path, "w") as fh:
        for st in studies:
            for rec in st.records:
                fh.write(json.dumps(rec) + "\n")

    config = dataclasses.replace(
        ServiceConfig(),
        backend_kind="fixture",
        fixture_path=str(fixture_path),
        store_dir=str(root / "store"),
        workers=1,
    )
    return Corpus(dir=root, fixture_path=fixture_path, studies=studies, config=config)


@pytest.fixture(scope="session")
def corpus(tmp_path_factory) -> Corpus:
    return build_corpus(tmp_path_factory.mktemp("corpus"))
