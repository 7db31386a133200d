"""Service configuration: key=value file with environment overrides.

Config files are flat `key = value` lines (# comments allowed). Every key
can be overridden by an environment variable: uppercase the key, replace
dots with underscores, prefix with CXR_ (e.g. `backend.kind` becomes
CXR_BACKEND_KIND). Environment wins over file, file wins over defaults.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

from ..detection import DetectionConfig
from ..labels import DEFAULT_CRITICAL_LABELS, resolve_label
from ..segmentation import SegmentationConfig, Variant

ENV_PREFIX = "CXR_"

DEFAULT_RESOLUTIONS: tuple[int, ...] = (224, 320, 512)


def _desk_segmentation() -> SegmentationConfig:
    # Paper-scale widths are audited statically; the forward pass that runs
    # per finding at the desk is the toy rig (depth 3, base 8).
    return SegmentationConfig(
        depth=3, base_filters=8, growth_rate=4, dense_blocks=2, dense_layers=2
    )


@dataclass(frozen=True)
class ServiceConfig:
    backend_kind: str = "tiny"  # "tiny" | "fixture"
    backend_seed: int = 0
    fixture_path: str | None = None
    anonymize_salt: str = "cxr-triage"
    decision_threshold: float = 0.5
    resolutions: tuple[int, ...] = DEFAULT_RESOLUTIONS
    critical_labels: frozenset[str] = DEFAULT_CRITICAL_LABELS
    detection: DetectionConfig = field(default_factory=DetectionConfig)
    segmentation: SegmentationConfig = field(default_factory=_desk_segmentation)
    segmentation_seed: int = 0
    store_dir: str = "./store"
    max_upload_bytes: int = 64 * 1024 * 1024
    workers: int = 2
    host: str = "127.0.0.1"
    port: int = 8080

    def __post_init__(self) -> None:
        if self.backend_kind not in ("tiny", "fixture"):
            raise ValueError(f"backend.kind {self.backend_kind!r}")
        if self.backend_kind == "fixture" and not self.fixture_path:
            raise ValueError("fixture backend needs backend.fixture_path")
        if not 0.0 <= self.decision_threshold <= 1.0:
            raise ValueError(f"decision_threshold {self.decision_threshold}")
        if self.max_upload_bytes < 1024:
            raise ValueError(f"max_upload_bytes {self.max_upload_bytes}")
        if self.workers < 0:
            raise ValueError(f"workers {self.workers}")
        for label in self.critical_labels:
            resolve_label(label)


def parse_config_text(text: str) -> dict[str, str]:
    values: dict[str, str] = {}
    for i, line in enumerate(text.splitlines()):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"config line {i + 1}: expected key = value, got {line!r}")
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()
    return values


def _env_key(key: str) -> str:
    return ENV_PREFIX + key.replace(".", "_").upper()


def load_config(path: str | Path | None = None, env: dict[str, str] | None = None) -> ServiceConfig:
    """Assemble the effective configuration from defaults, file, and env."""
    env = os.environ if env is None else env
    values = parse_config_text(Path(path).read_text()) if path else {}

    def get(key: str, default: str) -> str:
        return env.get(_env_key(key), values.get(key, default))

    variant = Variant(get("segmentation.variant", Variant.ATTENTION.value))
    fixture_path = get("backend.fixture_path", "") or None
    critical_raw = get("service.critical_labels", ",".join(sorted(DEFAULT_CRITICAL_LABELS)))
    critical = frozenset(
        resolve_label(part.strip()) for part in critical_raw.split(",") if part.strip()
    )
    detection = DetectionConfig(
        nms_threshold=float(get("detection.nms_threshold", "0.7")),
        score_threshold=float(get("detection.score_threshold", "0.5")),
    )
    segmentation = SegmentationConfig(
        variant=variant,
        depth=int(get("segmentation.depth", "3")),
        base_filters=int(get("segmentation.base_filters", "8")),
        growth_rate=int(get("segmentation.growth_rate", "4")),
        dense_blocks=int(get("segmentation.dense_blocks", "2")),
        dense_layers=int(get("segmentation.dense_layers", "2")),
        mask_threshold=float(get("segmentation.mask_threshold", "0.5")),
        crop_margin=float(get("segmentation.crop_margin", "0.1")),
    )
    return ServiceConfig(
        backend_kind=get("backend.kind", "tiny"),
        backend_seed=int(get("backend.seed", "0")),
        fixture_path=fixture_path,
        anonymize_salt=get("anonymize.salt", "cxr-triage"),
        decision_threshold=float(get("pipeline.decision_threshold", "0.5")),
        critical_labels=critical,
        detection=detection,
        segmentation=segmentation,
        segmentation_seed=int(get("segmentation.seed", "0")),
        store_dir=get("service.store_dir", "./store"),
        max_upload_bytes=int(get("service.max_upload_bytes", str(64 * 1024 * 1024))),
        workers=int(get("service.workers", "2")),
        host=get("server.host", "127.0.0.1"),
        port=int(get("server.port", "8080")),
    )


def make_backend(cfg: ServiceConfig):
    from ..backends import FixtureBackend, TinyReferenceBackend

    if cfg.backend_kind == "fixture":
        return FixtureBackend(cfg.fixture_path)
    return TinyReferenceBackend(seed=cfg.backend_seed)
