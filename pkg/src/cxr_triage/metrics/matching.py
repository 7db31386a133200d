"""Greedy IoU matching of predicted boxes against reference annotations."""
from __future__ import annotations

from dataclasses import dataclass

from ..detection import BBox, Detection, iou
from ..labels import resolve_label

DEFAULT_MATCH_IOU = 0.5


@dataclass(frozen=True)
class Annotation:
    """A reference (ground-truth) box."""

    bbox: BBox
    label: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "label", resolve_label(self.label))


@dataclass(frozen=True)
class MatchResult:
    tp: int
    fp: int
    fn: int
    pairs: tuple[tuple[int, int], ...]  # (pred index, ref index) in input order


def match_detections(
    preds: list[Detection],
    refs: list[Annotation],
    iou_threshold: float = DEFAULT_MATCH_IOU,
) -> MatchResult:
    """Greedy one-to-one matching, highest score first, same label only.

    Ties are broken on content (box corners, then label), not input
    position, so shuffling either list never changes the counts. Each
    prediction takes the unmatched reference with the highest IoU at or
    above the threshold.
    """
    if not 0.0 < iou_threshold <= 1.0:
        raise ValueError(f"iou_threshold {iou_threshold}")

    def det_key(i: int) -> tuple:
        d = preds[i]
        b = d.bbox
        return (-d.score, b.x1, b.y1, b.x2, b.y2, d.label)

    def ref_key(j: int) -> tuple:
        r = refs[j]
        b = r.bbox
        return (b.x1, b.y1, b.x2, b.y2, r.label)

    pred_order = sorted(range(len(preds)), key=det_key)
    ref_order = sorted(range(len(refs)), key=ref_key)

    taken = [False] * len(refs)
    pairs: list[tuple[int, int]] = []
    for i in pred_order:
        best_j = -1
        best_iou = 0.0
        for j in ref_order:
            if taken[j] or refs[j].label != preds[i].label:
                continue
            v = iou(preds[i].bbox, refs[j].bbox)
            if v >= iou_threshold and v > best_iou:
                best_iou = v
                best_j = j
        if best_j >= 0:
            taken[best_j] = True
            pairs.append((i, best_j))
    tp = len(pairs)
    return MatchResult(tp=tp, fp=len(preds) - tp, fn=len(refs) - tp, pairs=tuple(pairs))
