"""Fixture backend: replay recorded stage outputs keyed by image digest.

A fixture file is line-delimited JSON, one record per (digest, stage):

    {"digest": "<sha256 of the stage's input image>",
     "stage": "verify_xray" | "identify_chest" | "classify_view" |
              "keypoints" | "classify_224" | "classify_320" |
              "classify_512" | "detections",
     "output": {...}}

Keying on content digests keeps fixtures immune to metadata edits. The
RecordingBackend wrapper produces these files by delegating to any live
backend, which is how test corpora are authored.
"""
from __future__ import annotations

import json
from pathlib import Path

from ..detection import BBox, Detection
from ..ingest.image import Image8, image_digest
from ..ingest.metadata import ViewHint
from ..preprocess import KeypointSet
from .base import (
    BackendUnavailable,
    KeypointsNotFound,
    ModelBackend,
    ProbabilityVector,
    UnsupportedResolution,
    SUPPORTED_RESOLUTIONS,
)

STAGE_VERIFY = "verify_xray"
STAGE_CHEST = "identify_chest"
STAGE_VIEW = "classify_view"
STAGE_KEYPOINTS = "keypoints"
STAGE_DETECTIONS = "detections"


def stage_classify(resolution: int) -> str:
    return f"classify_{resolution}"


def encode_keypoints(kp: KeypointSet | None) -> dict:
    if kp is None:
        return {"found": False}
    return {
        "found": True,
        "left": list(kp.left_clavicle),
        "right": list(kp.right_clavicle),
        "spine": [list(p) for p in kp.spine],
    }


def decode_keypoints(output: dict) -> KeypointSet:
    if not output.get("found", True):
        raise KeypointsNotFound("fixture records no landmarks")
    return KeypointSet(
        left_clavicle=tuple(output["left"]),
        right_clavicle=tuple(output["right"]),
        spine=tuple(tuple(p) for p in output.get("spine", [])),
    )


def encode_detections(dets: list[Detection]) -> dict:
    return {
        "boxes": [
            {
                "label": d.label,
                "score": d.score,
                "x1": d.bbox.x1,
                "y1": d.bbox.y1,
                "x2": d.bbox.x2,
                "y2": d.bbox.y2,
            }
            for d in dets
        ]
    }


def decode_detections(output: dict) -> list[Detection]:
    return [
        Detection(
            bbox=BBox(float(b["x1"]), float(b["y1"]), float(b["x2"]), float(b["y2"])),
            label=str(b["label"]),
            score=float(b["score"]),
        )
        for b in output["boxes"]
    ]


class FixtureBackend(ModelBackend):
    """Replays recorded outputs; any unrecorded (digest, stage) is a hard miss."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._records: dict[tuple[str, str], dict] = {}
        with open(self.path, "r", encoding="utf-8") as fh:
            for i, line in enumerate(fh):
                line = line.strip()
                if not line:
                    continue
                try:
                    rec = json.loads(line)
                    key = (rec["digest"], rec["stage"])
                    self._records[key] = rec["output"]
                except (json.JSONDecodeError, KeyError) as e:
                    raise ValueError(f"{self.path}:{i + 1}: bad fixture record: {e}") from e

    def _lookup(self, stage: str, img: Image8) -> dict:
        digest = image_digest(img)
        try:
            return self._records[(digest, stage)]
        except KeyError:
            raise BackendUnavailable(stage, digest) from None

    def verify_xray(self, img: Image8) -> tuple[bool, float]:
        score = float(self._lookup(STAGE_VERIFY, img)["score"])
        return score >= 0.5, score

    def identify_chest(self, img: Image8) -> tuple[bool, float]:
        score = float(self._lookup(STAGE_CHEST, img)["score"])
        return score >= 0.5, score

    def classify_view(self, img: Image8) -> tuple[ViewHint, float]:
        out = self._lookup(STAGE_VIEW, img)
        return ViewHint(out["view"]), float(out["score"])

    def detect_keypoints(self, img: Image8) -> KeypointSet:
        return decode_keypoints(self._lookup(STAGE_KEYPOINTS, img))

    def classify_normal_abnormal(self, img: Image8, resolution: int) -> ProbabilityVector:
        if resolution not in SUPPORTED_RESOLUTIONS:
            raise UnsupportedResolution(resolution)
        out = self._lookup(stage_classify(resolution), img)
        return ProbabilityVector(tuple(float(p) for p in out["probs"]))

    def propose_detections(self, img: Image8) -> list[Detection]:
        return decode_detections(self._lookup(STAGE_DETECTIONS, img))


class RecordingBackend(ModelBackend):
    """Delegate to a live backend while capturing a replayable fixture."""

    def __init__(self, inner: ModelBackend):
        self.inner = inner
        self._seen: set[tuple[str, str]] = set()
        self.records: list[dict] = []

    def _record(self, stage: str, img: Image8, output: dict) -> None:
        digest = image_digest(img)
        key = (digest, stage)
        if key in self._seen:
            return
        self._seen.add(key)
        self.records.append({"digest": digest, "stage": stage, "output": output})

    def dump(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for rec in self.records:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")

    def verify_xray(self, img: Image8) -> tuple[bool, float]:
        ok, score = self.inner.verify_xray(img)
        self._record(STAGE_VERIFY, img, {"score": score})
        return ok, score

    def identify_chest(self, img: Image8) -> tuple[bool, float]:
        ok, score = self.inner.identify_chest(img)
        self._record(STAGE_CHEST, img, {"score": score})
        return ok, score

    def classify_view(self, img: Image8) -> tuple[ViewHint, float]:
        view, score = self.inner.classify_view(img)
        self._record(STAGE_VIEW, img, {"view": view.value, "score": score})
        return view, score

    def detect_keypoints(self, img: Image8) -> KeypointSet:
        try:
            kp = self.inner.detect_keypoints(img)
        except KeypointsNotFound:
            self._record(STAGE_KEYPOINTS, img, encode_keypoints(None))
            raise
        self._record(STAGE_KEYPOINTS, img, encode_keypoints(kp))
        return kp

    def classify_normal_abnormal(self, img: Image8, resolution: int) -> ProbabilityVector:
        vec = self.inner.classify_normal_abnormal(img, resolution)
        self._record(stage_classify(resolution), img, {"probs": list(vec.probs)})
        return vec

    def propose_detections(self, img: Image8) -> list[Detection]:
        dets = self.inner.propose_detections(img)
        self._record(STAGE_DETECTIONS, img, encode_detections(dets))
        return dets
