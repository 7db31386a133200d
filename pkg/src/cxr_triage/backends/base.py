"""Model backend contract plus the backend-independent decision ops."""
from __future__ import annotations

import abc
import enum
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from ..detection import Detection
from ..ingest.image import Image8
from ..ingest.metadata import ViewHint
from ..preprocess import KeypointSet

SUPPORTED_RESOLUTIONS: tuple[int, ...] = (224, 320, 512)
ENSEMBLE_ARITY = 3


class InvalidProbability(ValueError):
    """Components outside [0, 1] or mass not summing to one."""


class ArityMismatch(ValueError):
    """Ensemble fed the wrong number of member outputs."""


class UnsupportedResolution(ValueError):
    def __init__(self, resolution: int):
        super().__init__(f"resolution {resolution} not in {SUPPORTED_RESOLUTIONS}")
        self.resolution = resolution


class BackendUnavailable(RuntimeError):
    """Backend has no answer for this input (e.g. fixture miss)."""

    def __init__(self, stage: str, digest: str):
        super().__init__(f"no backend output for stage {stage!r}, digest {digest[:12]}...")
        self.stage = stage
        self.digest = digest


class KeypointsNotFound(RuntimeError):
    """Landmark head could not localise clavicles/spine."""


@dataclass(frozen=True)
class ProbabilityVector:
    """Class probabilities; components in [0, 1] summing to 1 within 1e-6."""

    probs: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.probs) < 2:
            raise InvalidProbability(f"need >= 2 classes, got {len(self.probs)}")
        for p in self.probs:
            if not 0.0 <= p <= 1.0:
                raise InvalidProbability(f"component {p} outside [0, 1]")
        if abs(sum(self.probs) - 1.0) > 1e-6:
            raise InvalidProbability(f"mass {sum(self.probs)} != 1")

    def __len__(self) -> int:
        return len(self.probs)

    @property
    def normal(self) -> float:
        return self.probs[0]

    @property
    def abnormal(self) -> float:
        return self.probs[1]


class Decision(str, enum.Enum):
    NORMAL = "Normal"
    ABNORMAL = "Abnormal"


@dataclass(frozen=True)
class SanityVerdict:
    """Outcomes of the gatekeeping stages, with their scores."""

    is_xray: bool
    xray_score: float
    is_chest: bool
    chest_score: float
    view: ViewHint
    view_score: float


def ensemble_average(vectors: Sequence[ProbabilityVector]) -> ProbabilityVector:
    """Component-wise mean of exactly three member outputs.

    Each component mean is computed in exact rational arithmetic and rounded
    once, so identical members return identically (the exact mean of equal
    values is that value) and member order never matters.
    """
    if len(vectors) != ENSEMBLE_ARITY:
        raise ArityMismatch(f"expected {ENSEMBLE_ARITY} members, got {len(vectors)}")
    n = len(vectors[0].probs)
    if any(len(v.probs) != n for v in vectors):
        raise ArityMismatch("member class counts differ")
    means = tuple(
        float(sum(Fraction(v.probs[i]) for v in vectors) / ENSEMBLE_ARITY) for i in range(n)
    )
    return ProbabilityVector(means)


def decide(vec: ProbabilityVector, threshold: float = 0.5) -> Decision:
    """Abnormal when the abnormal mass reaches the threshold (ties go Abnormal)."""
    if len(vec.probs) != 2:
        raise InvalidProbability(f"decision wants 2 classes, got {len(vec.probs)}")
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold {threshold}")
    return Decision.ABNORMAL if vec.abnormal >= threshold else Decision.NORMAL


class ModelBackend(abc.ABC):
    """Inference provider for every learned stage of the pipeline.

    Implementations must be pure functions of image content (keyed on the
    pixel digest), which is what makes runs replayable and fixtures exact.
    """

    @abc.abstractmethod
    def verify_xray(self, img: Image8) -> tuple[bool, float]:
        """Is this an X-ray at all? (verdict, score in [0,1]; verdict = score >= 0.5)."""

    @abc.abstractmethod
    def identify_chest(self, img: Image8) -> tuple[bool, float]:
        """Is the anatomy a chest?"""

    @abc.abstractmethod
    def classify_view(self, img: Image8) -> tuple[ViewHint, float]:
        """PA or AP projection; exact ties resolve to PA."""

    @abc.abstractmethod
    def detect_keypoints(self, img: Image8) -> KeypointSet:
        """Clavicle heads and spinous-process points, clamped to the frame."""

    @abc.abstractmethod
    def classify_normal_abnormal(self, img: Image8, resolution: int) -> ProbabilityVector:
        """[p_normal, p_abnormal] from the member trained at `resolution`."""

    @abc.abstractmethod
    def propose_detections(self, img: Image8) -> list[Detection]:
        """Scored candidate boxes in the coordinates of `img` (pre-NMS)."""
