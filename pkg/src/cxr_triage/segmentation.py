"""Segmentation structure: U-Net family wiring, gates, masks, accounting.

Training lives offline; at the desk we need (a) exact structural accounting
for the three decoder families so configs can be audited, (b) a tiny seeded
forward pass that exercises the real wiring on crops, and (c) the mask
utilities (binarise, run-length coding, crop geometry) the pipeline uses.

Weight creation order during a forward pass is the same order layer_plan()
enumerates, which is what ties parameter_count() to the code that runs.
All forwards are inference-mode: the configured dropout rate is carried as
a constant and never applied.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .detection import BBox
from .ingest.image import Image8
from .labels import resolve_label


class Variant(str, enum.Enum):
    ATTENTION = "AttentionUNet"
    NESTED = "UNetPlusPlus"
    DENSE = "DenseUNet"


@dataclass(frozen=True)
class SegmentationConfig:
    variant: Variant = Variant.ATTENTION
    depth: int = 5
    base_filters: int = 64
    growth_rate: int = 12
    dense_blocks: int = 4
    dense_layers: int = 4
    dropout: float = 0.3
    gate_threshold: float = 0.5
    mask_threshold: float = 0.5
    crop_margin: float = 0.1
    # Training-recipe constants, carried for provenance only.
    batch_size: int = 8
    learning_rate: float = 5e-4
    lr_decay: float = 0.9
    lr_decay_epochs: int = 15

    def __post_init__(self) -> None:
        if self.depth < 2:
            raise ValueError(f"depth {self.depth}")
        if self.base_filters < 1 or self.growth_rate < 1:
            raise ValueError("base_filters and growth_rate must be positive")
        if self.dense_blocks < 1 or self.dense_layers < 1:
            raise ValueError("dense_blocks and dense_layers must be positive")
        for name in ("dropout", "gate_threshold", "mask_threshold"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} {v} outside [0, 1]")
        if not 0.0 <= self.crop_margin <= 1.0:
            raise ValueError(f"crop_margin {self.crop_margin}")

    @classmethod
    def for_variant(cls, variant: Variant, **overrides) -> "SegmentationConfig":
        """Paper-scale defaults: densely connected decoder starts at 32 filters."""
        base = 32 if variant is Variant.DENSE else 64
        kwargs = {"variant": variant, "base_filters": base}
        kwargs.update(overrides)
        return cls(**kwargs)


def conv_param_count(cin: int, cout: int, k: int) -> int:
    """Weights plus biases of a k x k convolution (1->64 at 3x3 is 640)."""
    return cin * cout * k * k + cout


def dense_block_channels(c_in: int, layers: int, growth: int) -> int:
    """Output width of a dense block: every layer appends `growth` channels."""
    if c_in < 1 or layers < 1 or growth < 1:
        raise ValueError(f"c_in={c_in}, layers={layers}, growth={growth}")
    return c_in + layers * growth


def filter_schedule(cfg: SegmentationConfig) -> list[int]:
    """Channel widths down the encoder.

    Doubling variants give [base * 2**level] per level; the dense variant
    gives the width after each dense block (no transition compression, so
    the chain is c -> c + layers * growth).
    """
    if cfg.variant is Variant.DENSE:
        widths = []
        c = cfg.base_filters
        for _ in range(cfg.dense_blocks):
            c = dense_block_channels(c, cfg.dense_layers, cfg.growth_rate)
            widths.append(c)
        return widths
    return [cfg.base_filters * (1 << level) for level in range(cfg.depth)]


# --- tiny numeric kernels ---------------------------------------------------


def _conv2d(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Same-padded 2-D convolution; x (h,w,cin), w (k,k,cin,cout)."""
    k = w.shape[0]
    pad = k // 2
    xp = np.pad(x, ((pad, pad), (pad, pad), (0, 0)))
    win = sliding_window_view(xp, (k, k), axis=(0, 1))  # (h, w, cin, k, k)
    return np.einsum("hwcij,ijco->hwo", win, w, optimize=True) + b


def _relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _pool2(x: np.ndarray) -> np.ndarray:
    h, w, c = x.shape
    return x.reshape(h // 2, 2, w // 2, 2, c).max(axis=(1, 3))


def _up2(x: np.ndarray) -> np.ndarray:
    return x.repeat(2, axis=0).repeat(2, axis=1)


class _Bank:
    """Draws seeded weights on demand and records the creation order."""

    def __init__(self, seed: int):
        self.rng = np.random.default_rng(seed)
        self.record: list[tuple[str, int, int, int]] = []

    def conv(self, cin: int, cout: int, k: int) -> tuple[np.ndarray, np.ndarray]:
        self.record.append(("conv", cin, cout, k))
        scale = 1.0 / math.sqrt(cin * k * k)
        w = self.rng.normal(0.0, scale, size=(k, k, cin, cout))
        b = np.zeros(cout)
        return w, b


# --- architecture wiring ----------------------------------------------------


def unetpp_node_inputs(depth: int) -> dict[tuple[int, int], int]:
    """Input-tensor count per nested-skip node (i, j): j lateral + 1 upsample."""
    counts: dict[tuple[int, int], int] = {}
    for j in range(1, depth):
        for i in range(depth - j):
            counts[(i, j)] = j + 1
    return counts


def layer_plan(cfg: SegmentationConfig) -> list[tuple[str, int, int, int]]:
    """Convolution inventory (kind, cin, cout, k) in forward creation order."""
    plan: list[tuple[str, int, int, int]] = []

    def conv(cin: int, cout: int, k: int = 3) -> None:
        plan.append(("conv", cin, cout, k))

    if cfg.variant is Variant.DENSE:
        sched = filter_schedule(cfg)
        conv(1, cfg.base_filters)
        c = cfg.base_filters
        for _ in range(cfg.dense_blocks):
            for layer in range(cfg.dense_layers):
                conv(c + layer * cfg.growth_rate, cfg.growth_rate)
            c = dense_block_channels(c, cfg.dense_layers, cfg.growth_rate)
        for b in range(cfg.dense_blocks - 2, -1, -1):
            conv(sched[b + 1] + sched[b], sched[b])
        conv(sched[0], 1, 1)
        return plan

    f = filter_schedule(cfg)
    conv(1, f[0])
    for i in range(1, cfg.depth):
        conv(f[i - 1], f[i])
    if cfg.variant is Variant.ATTENTION:
        for i in range(cfg.depth - 2, -1, -1):
            conv(f[i + 1], f[i], 1)  # gate W_g
            conv(f[i], f[i], 1)  # gate W_x
            conv(f[i], 1, 1)  # gate psi
            conv(f[i + 1] + f[i], f[i])
    else:  # nested
        for j in range(1, cfg.depth):
            for i in range(cfg.depth - j):
                conv(j * f[i] + f[i + 1], f[i])
    conv(f[0], 1, 1)
    return plan


def parameter_count(cfg: SegmentationConfig) -> int:
    """Total learnable parameters of the configured decoder family."""
    return sum(conv_param_count(cin, cout, k) for _, cin, cout, k in layer_plan(cfg))


def attention_coefficients(
    gating: np.ndarray,
    skip: np.ndarray,
    seed: int = 0,
    inter_channels: int | None = None,
    hard: bool = False,
    threshold: float = 0.5,
) -> np.ndarray:
    """Additive attention gate coefficients over a skip connection.

    sigmoid(psi . relu(W_g g + W_x x)) with zero biases, so an all-zero
    pre-activation lands exactly at 0.5. Returns an (h, w) grid in [0, 1];
    hard mode thresholds it (>= threshold -> 1).
    """
    if gating.ndim == 2:
        gating = gating[:, :, None]
    if skip.ndim == 2:
        skip = skip[:, :, None]
    if gating.shape[:2] != skip.shape[:2]:
        raise ValueError(f"spatial mismatch {gating.shape[:2]} vs {skip.shape[:2]}")
    cg, cx = gating.shape[2], skip.shape[2]
    inter = inter_channels or max(cx // 2, 1)
    rng = np.random.default_rng(seed)
    wg = rng.normal(0.0, 1.0 / math.sqrt(cg), size=(cg, inter))
    wx = rng.normal(0.0, 1.0 / math.sqrt(cx), size=(cx, inter))
    psi = rng.normal(0.0, 1.0 / math.sqrt(inter), size=(inter, 1))
    s = _relu(gating @ wg + skip @ wx)
    coeff = _sigmoid((s @ psi)[:, :, 0])
    if hard:
        return hard_gate(coeff, threshold)
    return coeff


def hard_gate(coeff: np.ndarray, threshold: float = 0.5) -> np.ndarray:
    """Binarise a coefficient grid: >= threshold passes (0.49 -> 0, 0.51 -> 1)."""
    return (coeff >= threshold).astype(np.float64)


def _forward_attention(x: np.ndarray, cfg: SegmentationConfig, bank: _Bank) -> np.ndarray:
    f = filter_schedule(cfg)
    enc = [_relu(_conv2d(x, *bank.conv(1, f[0], 3)))]
    for i in range(1, cfg.depth):
        enc.append(_relu(_conv2d(_pool2(enc[-1]), *bank.conv(f[i - 1], f[i], 3))))
    dec = enc[-1]
    for i in range(cfg.depth - 2, -1, -1):
        g = _up2(dec)
        wg, bg = bank.conv(f[i + 1], f[i], 1)
        wx, bx = bank.conv(f[i], f[i], 1)
        wpsi, bpsi = bank.conv(f[i], 1, 1)
        s = _relu(_conv2d(g, wg, bg) + _conv2d(enc[i], wx, bx))
        coeff = _sigmoid(_conv2d(s, wpsi, bpsi))
        gated = enc[i] * coeff
        dec = _relu(_conv2d(np.concatenate([g, gated], axis=2), *bank.conv(f[i + 1] + f[i], f[i], 3)))
    return dec


def _forward_nested(x: np.ndarray, cfg: SegmentationConfig, bank: _Bank) -> np.ndarray:
    f = filter_schedule(cfg)
    nodes: dict[tuple[int, int], np.ndarray] = {}
    nodes[(0, 0)] = _relu(_conv2d(x, *bank.conv(1, f[0], 3)))
    for i in range(1, cfg.depth):
        nodes[(i, 0)] = _relu(_conv2d(_pool2(nodes[(i - 1, 0)]), *bank.conv(f[i - 1], f[i], 3)))
    for j in range(1, cfg.depth):
        for i in range(cfg.depth - j):
            laterals = [nodes[(i, p)] for p in range(j)]
            inputs = np.concatenate(laterals + [_up2(nodes[(i + 1, j - 1)])], axis=2)
            nodes[(i, j)] = _relu(_conv2d(inputs, *bank.conv(j * f[i] + f[i + 1], f[i], 3)))
    return nodes[(0, cfg.depth - 1)]


def _forward_dense(x: np.ndarray, cfg: SegmentationConfig, bank: _Bank) -> np.ndarray:
    sched = filter_schedule(cfg)

    def dense_block(feat: np.ndarray) -> np.ndarray:
        cin = feat.shape[2]
        for _ in range(cfg.dense_layers):
            y = _relu(_conv2d(feat, *bank.conv(feat.shape[2], cfg.growth_rate, 3)))
            feat = np.concatenate([feat, y], axis=2)
        assert feat.shape[2] == dense_block_channels(cin, cfg.dense_layers, cfg.growth_rate)
        return feat

    feat = _relu(_conv2d(x, *bank.conv(1, cfg.base_filters, 3)))
    skips: list[np.ndarray] = []
    for b in range(cfg.dense_blocks):
        feat = dense_block(feat)
        if b < cfg.dense_blocks - 1:
            skips.append(feat)
            feat = _pool2(feat)
    for b in range(cfg.dense_blocks - 2, -1, -1):
        feat = np.concatenate([_up2(feat), skips[b]], axis=2)
        feat = _relu(_conv2d(feat, *bank.conv(sched[b + 1] + sched[b], sched[b], 3)))
    return feat


def unet_forward(image: Image8 | np.ndarray, cfg: SegmentationConfig, seed: int = 0) -> np.ndarray:
    """Seeded inference pass of the configured variant; (h, w) probabilities.

    Input sides are zero-padded up to the variant's stride multiple and the
    output is cropped back, so output dims always equal input dims. The same
    seed always produces bit-identical weights and output.
    """
    px = image.pixels if isinstance(image, Image8) else image
    if px.ndim != 2 or px.size == 0:
        raise ValueError(f"expected a 2-D raster, got shape {px.shape}")
    h, w = px.shape
    levels = cfg.dense_blocks - 1 if cfg.variant is Variant.DENSE else cfg.depth - 1
    mult = 1 << levels
    ph = (mult - h % mult) % mult
    pw = (mult - w % mult) % mult
    x = px.astype(np.float64) / 255.0
    x = np.pad(x, ((0, ph), (0, pw)))[:, :, None]

    bank = _Bank(seed)
    if cfg.variant is Variant.ATTENTION:
        feat = _forward_attention(x, cfg, bank)
        head_cin = filter_schedule(cfg)[0]
    elif cfg.variant is Variant.NESTED:
        feat = _forward_nested(x, cfg, bank)
        head_cin = filter_schedule(cfg)[0]
    else:
        feat = _forward_dense(x, cfg, bank)
        head_cin = filter_schedule(cfg)[0]
    logits = _conv2d(feat, *bank.conv(head_cin, 1, 1))[:, :, 0]
    return _sigmoid(logits)[:h, :w]


def forward_plan_record(cfg: SegmentationConfig, side: int | None = None, seed: int = 0) -> list:
    """Convolutions actually created by a forward pass (for plan audits)."""
    levels = cfg.dense_blocks - 1 if cfg.variant is Variant.DENSE else cfg.depth - 1
    side = side or (1 << levels)
    img = np.zeros((side, side), dtype=np.uint8)
    bank = _Bank(seed)
    x = (img.astype(np.float64) / 255.0)[:, :, None]
    if cfg.variant is Variant.ATTENTION:
        feat = _forward_attention(x, cfg, bank)
    elif cfg.variant is Variant.NESTED:
        feat = _forward_nested(x, cfg, bank)
    else:
        feat = _forward_dense(x, cfg, bank)
    _conv2d(feat, *bank.conv(filter_schedule(cfg)[0], 1, 1))
    return bank.record


# --- masks ------------------------------------------------------------------


@dataclass(frozen=True)
class Mask:
    """Per-pixel probabilities for one finding, in crop coordinates."""

    label: str
    probs: np.ndarray  # (h, w) float64 in [0, 1]

    def __post_init__(self) -> None:
        if self.probs.ndim != 2 or self.probs.size == 0:
            raise ValueError(f"mask shape {self.probs.shape}")
        if float(self.probs.min()) < 0.0 or float(self.probs.max()) > 1.0:
            raise ValueError("mask probabilities outside [0, 1]")
        object.__setattr__(self, "label", resolve_label(self.label))

    @property
    def height(self) -> int:
        return int(self.probs.shape[0])

    @property
    def width(self) -> int:
        return int(self.probs.shape[1])


def binarize_mask(mask: Mask, threshold: float = 0.5) -> Mask:
    """Threshold probabilities: >= threshold becomes foreground."""
    return Mask(mask.label, (mask.probs >= threshold).astype(np.float64))


def rle_encode(binary: np.ndarray) -> list[int]:
    """Row-major run lengths, alternating and starting with the zero run.

    The first entry may be 0 (mask begins with foreground); runs always sum
    to width * height.
    """
    flat = np.asarray(binary).reshape(-1)
    if flat.size == 0:
        raise ValueError("empty mask")
    vals = (flat != 0).astype(np.int64)
    change = np.nonzero(np.diff(vals))[0] + 1
    bounds = np.concatenate(([0], change, [vals.size]))
    runs = np.diff(bounds).tolist()
    if vals[0] == 1:
        runs = [0] + runs
    return [int(r) for r in runs]


def rle_decode(runs: list[int], width: int, height: int) -> np.ndarray:
    """Inverse of rle_encode; validates the run total against the geometry."""
    if any(r < 0 for r in runs):
        raise ValueError("negative run length")
    if sum(runs) != width * height:
        raise ValueError(f"runs sum {sum(runs)} != {width * height}")
    out = np.zeros(width * height, dtype=np.uint8)
    pos = 0
    val = 0
    for r in runs:
        if val:
            out[pos : pos + r] = 1
        pos += r
        val ^= 1
    return out.reshape(height, width)


def crop_with_margin(img: Image8, box: BBox, margin: float = 0.1) -> tuple[np.ndarray, tuple[int, int]]:
    """Crop a box expanded by margin per side, clamped to the frame.

    Returns the pixel crop and its (x, y) origin in image coordinates.
    """
    h, w = img.pixels.shape
    mx = box.width * margin
    my = box.height * margin
    x0 = max(0, math.floor(box.x1 - mx))
    y0 = max(0, math.floor(box.y1 - my))
    x1 = min(w, math.ceil(box.x2 + mx))
    y1 = min(h, math.ceil(box.y2 + my))
    x1 = max(x1, x0 + 1)
    y1 = max(y1, y0 + 1)
    if x0 >= w or y0 >= h:
        raise ValueError(f"box {box} outside {w}x{h} frame")
    return img.pixels[y0:y1, x0:x1].copy(), (x0, y0)
