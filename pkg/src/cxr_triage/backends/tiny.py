"""TinyReference backend: a real, seeded forward pass at toy scale.

Weights are drawn once per backend instance from a seed, so every answer is
a bit-reproducible function of (seed, image content). The classifier is a
genuine patch-embedding + single self-attention block + softmax head; the
sanity heads are logistic probes over image statistics. Nothing here is
trained - the point is exercising the real interfaces deterministically.
"""
from __future__ import annotations

import math

import numpy as np

from ..detection import BBox, Detection
from ..ingest.image import Image8, image_digest
from ..ingest.metadata import ViewHint
from ..labels import CANONICAL_LABELS
from ..preprocess import KeypointSet, resize
from .base import (
    SUPPORTED_RESOLUTIONS,
    KeypointsNotFound,
    ModelBackend,
    ProbabilityVector,
    UnsupportedResolution,
)

_EMBED_DIM = 16
_PATCH = 8  # 32x32 working raster -> 4x4 grid of 8x8 patches


def _digest_ints(digest: str) -> list[int]:
    return [int(digest[i : i + 8], 16) for i in range(0, 32, 8)]


def _features(img: Image8) -> np.ndarray:
    """Cheap global statistics driving the sanity probes."""
    px = img.pixels.astype(np.float64) / 255.0
    h, w = px.shape
    qh, qw = max(h // 2, 1), max(w // 2, 1)
    gy = np.abs(np.diff(px, axis=0)).mean() if h > 1 else 0.0
    gx = np.abs(np.diff(px, axis=1)).mean() if w > 1 else 0.0
    return np.array(
        [
            px.mean(),
            px.std(),
            px[:qh, :qw].mean(),
            px[:qh, qw:].mean() if w > 1 else px.mean(),
            px[qh:, :qw].mean() if h > 1 else px.mean(),
            px[qh:, qw:].mean() if h > 1 and w > 1 else px.mean(),
            gy,
            gx,
            min(w, h) / max(w, h),
        ]
    )


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


class TinyReferenceBackend(ModelBackend):
    def __init__(self, seed: int = 0):
        self.seed = seed
        rng = np.random.default_rng([seed, 0xC0FFEE])
        self._probe_w = {
            stage: rng.normal(0.0, 1.5, size=9)
            for stage in ("verify_xray", "identify_chest", "classify_view")
        }
        self._cls: dict[int, dict[str, np.ndarray]] = {}
        for res in SUPPORTED_RESOLUTIONS:
            r = np.random.default_rng([seed, res])
            d = _EMBED_DIM
            self._cls[res] = {
                "embed": r.normal(0.0, 1.0 / math.sqrt(_PATCH * _PATCH), size=(_PATCH * _PATCH, d)),
                "pos": r.normal(0.0, 0.1, size=(16, d)),
                "wq": r.normal(0.0, 1.0 / math.sqrt(d), size=(d, d)),
                "wk": r.normal(0.0, 1.0 / math.sqrt(d), size=(d, d)),
                "wv": r.normal(0.0, 1.0 / math.sqrt(d), size=(d, d)),
                "w1": r.normal(0.0, 1.0 / math.sqrt(d), size=(d, d)),
                "w2": r.normal(0.0, 1.0 / math.sqrt(d), size=(d, d)),
                "head": r.normal(0.0, 1.0 / math.sqrt(d), size=(d, 2)),
            }

    # -- sanity probes ------------------------------------------------------

    def _probe(self, stage: str, img: Image8) -> float:
        return _sigmoid(float(self._probe_w[stage] @ _features(img)))

    def verify_xray(self, img: Image8) -> tuple[bool, float]:
        score = self._probe("verify_xray", img)
        return score >= 0.5, score

    def identify_chest(self, img: Image8) -> tuple[bool, float]:
        score = self._probe("identify_chest", img)
        return score >= 0.5, score

    def classify_view(self, img: Image8) -> tuple[ViewHint, float]:
        pa = self._probe("classify_view", img)
        if pa >= 0.5:
            return ViewHint.PA, pa
        return ViewHint.AP, 1.0 - pa

    # -- landmarks ------------------------------------------------------------

    def detect_keypoints(self, img: Image8) -> KeypointSet:
        if float(img.pixels.std()) == 0.0:
            raise KeypointsNotFound("featureless image")
        h, w = img.pixels.shape
        rng = np.random.default_rng([self.seed, 0x5EED] + _digest_ints(image_digest(img)))
        jx = rng.normal(0.0, 0.01, size=8)

        def clamp(x: float, hi: int) -> float:
            return min(max(x, 0.0), hi - 1.0)

        left = (clamp((0.35 + jx[0]) * w, w), clamp((0.22 + jx[1]) * h, h))
        right = (clamp((0.65 + jx[2]) * w, w), clamp((0.22 + jx[3]) * h, h))
        spine = tuple(
            (clamp((0.5 + jx[4 + i]) * w, w), clamp((0.3 + 0.15 * i) * h, h)) for i in range(4)
        )
        return KeypointSet(left_clavicle=left, right_clavicle=right, spine=spine)

    # -- classification -------------------------------------------------------

    def classify_normal_abnormal(self, img: Image8, resolution: int) -> ProbabilityVector:
        if resolution not in SUPPORTED_RESOLUTIONS:
            raise UnsupportedResolution(resolution)
        w = self._cls[resolution]
        x = resize(img, 32).pixels.astype(np.float64) / 255.0
        patches = (
            x.reshape(4, _PATCH, 4, _PATCH).transpose(0, 2, 1, 3).reshape(16, _PATCH * _PATCH)
        )
        tok = patches @ w["embed"] + w["pos"]
        q, k, v = tok @ w["wq"], tok @ w["wk"], tok @ w["wv"]
        att = q @ k.T / math.sqrt(_EMBED_DIM)
        att = np.exp(att - att.max(axis=1, keepdims=True))
        att /= att.sum(axis=1, keepdims=True)
        tok = tok + att @ v
        tok = tok + np.maximum(tok @ w["w1"], 0.0) @ w["w2"]
        logits = tok.mean(axis=0) @ w["head"]
        e = np.exp(logits - logits.max())
        p = e / e.sum()
        return ProbabilityVector((float(p[0]), float(p[1])))

    # -- detection proposals ----------------------------------------------------

    def propose_detections(self, img: Image8) -> list[Detection]:
        h, w = img.pixels.shape
        rng = np.random.default_rng([self.seed, 0xB0CE5] + _digest_ints(image_digest(img)))
        count = int(rng.integers(2, 7))
        out: list[Detection] = []
        for _ in range(count):
            bw = float(rng.uniform(0.12, 0.45) * w)
            bh = float(rng.uniform(0.12, 0.45) * h)
            cx = float(rng.uniform(bw / 2, w - bw / 2)) if w > bw else w / 2.0
            cy = float(rng.uniform(bh / 2, h - bh / 2)) if h > bh else h / 2.0
            x1 = max(0.0, cx - bw / 2)
            y1 = max(0.0, cy - bh / 2)
            x2 = min(float(w), cx + bw / 2)
            y2 = min(float(h), cy + bh / 2)
            if x2 - x1 < 2.0 or y2 - y1 < 2.0:
                continue
            label = CANONICAL_LABELS[int(rng.integers(0, len(CANONICAL_LABELS)))]
            score = float(rng.uniform(0.3, 0.99))
            out.append(Detection(bbox=BBox(x1, y1, x2, y2), label=label, score=score))
        return out
