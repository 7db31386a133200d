"""Detection geometry: boxes, anchors, NMS, delta coding, smooth-L1.

The box pipeline consumes scored boxes from a model backend; nothing here
learns. All kernels are deterministic, and the suppression/selection steps
keep a documented stable order (score descending, then input index) so
serialized outputs are reproducible byte for byte.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .labels import resolve_label


class InvalidBox(ValueError):
    """Box corners out of order (x1 >= x2 or y1 >= y2)."""


class DegenerateResult(ValueError):
    """Decoded box collapsed to zero extent or overflowed."""


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box, corner convention, x1 < x2 and y1 < y2."""

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self) -> None:
        if not (self.x1 < self.x2 and self.y1 < self.y2):
            raise InvalidBox(f"({self.x1},{self.y1},{self.x2},{self.y2})")

    @property
    def width(self) -> float:
        return self.x2 - self.x1

    @property
    def height(self) -> float:
        return self.y2 - self.y1

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> tuple[float, float]:
        return ((self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0)


@dataclass(frozen=True)
class Detection:
    bbox: BBox
    label: str
    score: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score {self.score} outside [0, 1]")
        object.__setattr__(self, "label", resolve_label(self.label))


class ProposalMode(enum.Enum):
    TRAIN = "train"
    INFER = "infer"


@dataclass(frozen=True)
class DetectionConfig:
    """Anchor/NMS/coding constants for the region-proposal stage."""

    anchor_sizes: tuple[float, ...] = (128.0, 256.0, 512.0)
    aspect_ratios: tuple[float, ...] = (1.0, 2.0, 0.5)  # height/width
    nms_threshold: float = 0.7
    train_proposals: int = 2000
    infer_proposals: int = 300
    delta_weights: tuple[float, float, float, float] = (0.1, 0.1, 0.2, 0.2)
    smooth_l1_beta: float = 1.0
    score_threshold: float = 0.5

    def __post_init__(self) -> None:
        if not self.anchor_sizes or any(s <= 0 for s in self.anchor_sizes):
            raise ValueError(f"anchor_sizes {self.anchor_sizes}")
        if not self.aspect_ratios or any(r <= 0 for r in self.aspect_ratios):
            raise ValueError(f"aspect_ratios {self.aspect_ratios}")
        if not 0.0 < self.nms_threshold < 1.0:
            raise ValueError(f"nms_threshold {self.nms_threshold}")
        if self.train_proposals <= 0 or self.infer_proposals <= 0:
            raise ValueError("proposal budgets must be positive")
        if any(w <= 0 for w in self.delta_weights):
            raise ValueError(f"delta_weights {self.delta_weights}")
        if self.smooth_l1_beta <= 0:
            raise ValueError(f"smooth_l1_beta {self.smooth_l1_beta}")
        if not 0.0 <= self.score_threshold <= 1.0:
            raise ValueError(f"score_threshold {self.score_threshold}")


def iou(a: BBox, b: BBox) -> float:
    """Intersection-over-union; 0 when the boxes do not overlap."""
    ix = min(a.x2, b.x2) - max(a.x1, b.x1)
    iy = min(a.y2, b.y2) - max(a.y1, b.y1)
    if ix <= 0.0 or iy <= 0.0:
        return 0.0
    inter = ix * iy
    return inter / (a.area + b.area - inter)


def generate_anchors(grid_w: int, grid_h: int, stride: float, cfg: DetectionConfig) -> list[BBox]:
    """Anchor boxes for every grid cell, len(sizes) x len(ratios) per cell.

    Cell (i, j) centers its anchors at ((i + 0.5) * stride, (j + 0.5) * stride).
    A ratio r (height/width) preserves area: w = s / sqrt(r), h = s * sqrt(r).
    Order: rows (j), then columns (i), then sizes, then ratios.
    """
    if grid_w <= 0 or grid_h <= 0 or stride <= 0:
        raise ValueError(f"grid {grid_w}x{grid_h}, stride {stride}")
    shapes = []
    for s in cfg.anchor_sizes:
        for r in cfg.aspect_ratios:
            w = s / math.sqrt(r)
            h = s * math.sqrt(r)
            shapes.append((w / 2.0, h / 2.0))
    anchors: list[BBox] = []
    for j in range(grid_h):
        cy = (j + 0.5) * stride
        for i in range(grid_w):
            cx = (i + 0.5) * stride
            for hw, hh in shapes:
                anchors.append(BBox(cx - hw, cy - hh, cx + hw, cy + hh))
    return anchors


def nms(dets: list[Detection], threshold: float) -> list[Detection]:
    """Greedy class-wise non-maximum suppression.

    Boxes only suppress boxes of the same label, suppression is strict
    (IoU > threshold), and the output keeps the stable order (score
    descending, ties by input index). Vectorised after the py_cpu_nms
    pattern; the IoU arithmetic matches iou() exactly.
    """
    if not dets:
        return []
    order = sorted(range(len(dets)), key=lambda k: (-dets[k].score, k))
    x1 = np.array([dets[k].bbox.x1 for k in order])
    y1 = np.array([dets[k].bbox.y1 for k in order])
    x2 = np.array([dets[k].bbox.x2 for k in order])
    y2 = np.array([dets[k].bbox.y2 for k in order])
    areas = (x2 - x1) * (y2 - y1)
    label_ids: dict[str, int] = {}
    labels = np.array(
        [label_ids.setdefault(dets[k].label, len(label_ids)) for k in order], dtype=np.int64
    )

    alive = np.ones(len(order), dtype=bool)
    keep: list[int] = []
    for pos in range(len(order)):
        if not alive[pos]:
            continue
        keep.append(order[pos])
        rest = np.nonzero(alive)[0]
        rest = rest[rest > pos]
        if rest.size == 0:
            continue
        same = rest[labels[rest] == labels[pos]]
        if same.size == 0:
            continue
        ix = np.minimum(x2[pos], x2[same]) - np.maximum(x1[pos], x1[same])
        iy = np.minimum(y2[pos], y2[same]) - np.maximum(y1[pos], y1[same])
        ix = np.maximum(ix, 0.0)
        iy = np.maximum(iy, 0.0)
        inter = ix * iy
        ovr = inter / (areas[pos] + areas[same] - inter)
        # Zero-extent intersections divide fine: inter is 0 there.
        alive[same[ovr > threshold]] = False
    return [dets[k] for k in keep]


def select_top_proposals(dets: list[Detection], mode: ProposalMode, cfg: DetectionConfig) -> list[Detection]:
    """Budget the proposal list: top 2000 in training, top 300 at inference.

    Sorting is stable under score ties (input index breaks ties), so a
    fixed input order always yields the same selection.
    """
    budget = cfg.train_proposals if mode is ProposalMode.TRAIN else cfg.infer_proposals
    order = sorted(range(len(dets)), key=lambda k: (-dets[k].score, k))
    return [dets[k] for k in order[:budget]]


def encode_deltas(
    gt: BBox, anchor: BBox, weights: tuple[float, float, float, float] = (0.1, 0.1, 0.2, 0.2)
) -> tuple[float, float, float, float]:
    """Box regression targets: center offsets over anchor size and log scales.

    tx = ((gx - ax) / aw) / wx, tw = ln(gw / aw) / ww, and the y/h pair
    analogously; smaller weights inflate the targets.
    """
    wx, wy, ww, wh = weights
    ax, ay = anchor.center
    gx, gy = gt.center
    tx = ((gx - ax) / anchor.width) / wx
    ty = ((gy - ay) / anchor.height) / wy
    tw = math.log(gt.width / anchor.width) / ww
    th = math.log(gt.height / anchor.height) / wh
    return (tx, ty, tw, th)


_LOG_LIMIT = 60.0  # exp(60) ~ 1e26: anything past this is a runaway regression


def decode_deltas(
    deltas: tuple[float, float, float, float],
    anchor: BBox,
    weights: tuple[float, float, float, float] = (0.1, 0.1, 0.2, 0.2),
    bounds: tuple[float, float] | None = None,
) -> BBox:
    """Invert encode_deltas; optionally clip the result to (width, height) bounds.

    Raises DegenerateResult when the decoded box has no extent (possible
    after clipping, or on overflowing scale terms).
    """
    tx, ty, tw, th = deltas
    wx, wy, ww, wh = weights
    if abs(tw * ww) > _LOG_LIMIT or abs(th * wh) > _LOG_LIMIT:
        raise DegenerateResult(f"scale deltas overflow: tw={tw}, th={th}")
    ax, ay = anchor.center
    cx = ax + (tx * wx) * anchor.width
    cy = ay + (ty * wy) * anchor.height
    w = anchor.width * math.exp(tw * ww)
    h = anchor.height * math.exp(th * wh)
    x1, x2 = cx - w / 2.0, cx + w / 2.0
    y1, y2 = cy - h / 2.0, cy + h / 2.0
    if bounds is not None:
        bw, bh = bounds
        x1, x2 = max(x1, 0.0), min(x2, bw)
        y1, y2 = max(y1, 0.0), min(y2, bh)
    if not (x1 < x2 and y1 < y2):
        raise DegenerateResult(f"empty box ({x1},{y1},{x2},{y2})")
    return BBox(x1, y1, x2, y2)


def smooth_l1(x: float, beta: float = 1.0) -> float:
    """Huber-style loss: 0.5 x^2 / beta inside |x| < beta, |x| - 0.5 beta outside."""
    ax = abs(x)
    if ax < beta:
        return 0.5 * x * x / beta
    return ax - 0.5 * beta


def smooth_l1_grad(x: float, beta: float = 1.0) -> float:
    """Derivative of smooth_l1: x / beta inside the quadratic zone, else sign(x)."""
    if abs(x) < beta:
        return x / beta
    return math.copysign(1.0, x)


# --- line-delimited serialization -----------------------------------------

_RECORD_KEYS = ("study_id", "label", "score", "x1", "y1", "x2", "y2")


def detection_to_record(study_id: str, det: Detection) -> dict:
    return {
        "study_id": study_id,
        "label": det.label,
        "score": det.score,
        "x1": det.bbox.x1,
        "y1": det.bbox.y1,
        "x2": det.bbox.x2,
        "y2": det.bbox.y2,
    }


def record_to_detection(rec: dict) -> tuple[str, Detection]:
    missing = [k for k in _RECORD_KEYS if k not in rec]
    if missing:
        raise ValueError(f"detection record missing {missing}")
    det = Detection(
        bbox=BBox(float(rec["x1"]), float(rec["y1"]), float(rec["x2"]), float(rec["y2"])),
        label=str(rec["label"]),
        score=float(rec["score"]),
    )
    return str(rec["study_id"]), det


def dump_detections(study_id: str, dets: list[Detection]) -> str:
    """NDJSON lines with a canonical key order (byte-stable for fixed inputs)."""
    lines = [json.dumps(detection_to_record(study_id, d), sort_keys=True) for d in dets]
    return "".join(line + "\n" for line in lines)


def load_detections(text: str) -> list[tuple[str, Detection]]:
    out = []
    for i, line in enumerate(text.splitlines()):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as e:
            raise ValueError(f"bad detection record on line {i + 1}: {e}") from e
        out.append(record_to_detection(rec))
    return out
