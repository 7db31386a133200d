"""Geometric preprocessing: letterboxed resize, tilt estimation, rotation.

Conventions used throughout (and by the tests):

* Pixel (i, j) sits at continuous coordinate (x=j, y=i) with y growing
  downward; the image center is ((w-1)/2, (h-1)/2).
* Resampling uses half-pixel-center bilinear interpolation, so a resize
  whose scale is exactly 1 is the identity.
* Tilt angles are degrees in (-90, 90], positive = clockwise tilt as seen
  on screen. apply_rotation(img, angle) rotates content by -angle, i.e. it
  undoes a positive measured tilt.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ingest.image import Image8

DEFAULT_RESOLUTIONS: tuple[int, ...] = (224, 320, 512)
CONSISTENCY_TOLERANCE_DEG = 10.0

Point = tuple[float, float]


class DegenerateKeypoints(ValueError):
    """Coincident or otherwise unusable landmark points."""


@dataclass(frozen=True)
class KeypointSet:
    """Clavicle heads plus optional spinous-process points (top to bottom)."""

    left_clavicle: Point
    right_clavicle: Point
    spine: tuple[Point, ...] = ()


def resize(img: Image8, side: int) -> Image8:
    """Bilinear resize onto a side x side canvas, preserving aspect ratio.

    The scaled content is centered and the remainder zero-filled, so a
    100x200 portrait gets 56-pixel black bands left and right at side=224.
    """
    if side <= 0:
        raise ValueError(f"side {side}")
    h, w = img.pixels.shape
    if (h, w) == (side, side):
        return Image8(img.pixels.copy())
    scale = side / max(w, h)
    cw = max(1, round(w * scale))
    ch = max(1, round(h * scale))

    src = img.pixels.astype(np.float64)
    xs = (np.arange(cw, dtype=np.float64) + 0.5) * (w / cw) - 0.5
    ys = (np.arange(ch, dtype=np.float64) + 0.5) * (h / ch) - 0.5
    xs = np.clip(xs, 0.0, w - 1.0)
    ys = np.clip(ys, 0.0, h - 1.0)
    x0 = np.floor(xs).astype(np.int64)
    y0 = np.floor(ys).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = xs - x0
    fy = ys - y0

    top = src[y0][:, x0] * (1 - fx) + src[y0][:, x1] * fx
    bot = src[y1][:, x0] * (1 - fx) + src[y1][:, x1] * fx
    content = top * (1 - fy)[:, None] + bot * fy[:, None]

    out = np.zeros((side, side), dtype=np.float64)
    oy = (side - ch) // 2
    ox = (side - cw) // 2
    out[oy : oy + ch, ox : ox + cw] = content
    return Image8(np.clip(np.rint(out), 0, 255).astype(np.uint8))


def multi_resolution(img: Image8, resolutions: tuple[int, ...] = DEFAULT_RESOLUTIONS) -> dict[int, Image8]:
    """Resized copies keyed by target side, all derived from the same input."""
    return {side: resize(img, side) for side in resolutions}


def _normalize_angle(angle: float) -> float:
    while angle <= -90.0:
        angle += 180.0
    while angle > 90.0:
        angle -= 180.0
    return angle


def estimate_rotation(kp: KeypointSet) -> float:
    """Signed tilt of the inter-clavicular line, degrees in (-90, 90].

    Positive means the right clavicle sits lower on screen (clockwise
    tilt); translation and scale of the landmark set do not matter.
    """
    dx = kp.right_clavicle[0] - kp.left_clavicle[0]
    dy = kp.right_clavicle[1] - kp.left_clavicle[1]
    if dx == 0.0 and dy == 0.0:
        raise DegenerateKeypoints("coincident clavicle points")
    return _normalize_angle(math.degrees(math.atan2(dy, dx)))


def spine_axis_angle(kp: KeypointSet) -> float:
    """Angle between the spine axis and the clavicle-line normal, in [0, 90]."""
    if len(kp.spine) < 2:
        raise DegenerateKeypoints("need at least two spine points")
    sx = kp.spine[-1][0] - kp.spine[0][0]
    sy = kp.spine[-1][1] - kp.spine[0][1]
    if sx == 0.0 and sy == 0.0:
        raise DegenerateKeypoints("coincident spine points")
    dx = kp.right_clavicle[0] - kp.left_clavicle[0]
    dy = kp.right_clavicle[1] - kp.left_clavicle[1]
    if dx == 0.0 and dy == 0.0:
        raise DegenerateKeypoints("coincident clavicle points")
    # Normal of the clavicle line vs the spine direction.
    nx, ny = -dy, dx
    dot = abs(nx * sx + ny * sy)
    norm = math.hypot(nx, ny) * math.hypot(sx, sy)
    cosang = min(1.0, dot / norm)
    return math.degrees(math.acos(cosang))


def rotation_low_confidence(kp: KeypointSet, tolerance_deg: float = CONSISTENCY_TOLERANCE_DEG) -> bool:
    """True when the spine axis disagrees with the clavicle normal by >= tolerance.

    Without spine points there is no second opinion and the estimate stands.
    """
    if len(kp.spine) < 2:
        return False
    return spine_axis_angle(kp) >= tolerance_deg


def image_center(img: Image8) -> Point:
    h, w = img.pixels.shape
    return ((w - 1) / 2.0, (h - 1) / 2.0)


def rotate_points(points: list[Point], theta_deg: float, center: Point) -> list[Point]:
    """Rotate points about center by theta (positive = clockwise on screen)."""
    t = math.radians(theta_deg)
    c, s = math.cos(t), math.sin(t)
    cx, cy = center
    out = []
    for x, y in points:
        dx, dy = x - cx, y - cy
        out.append((cx + c * dx - s * dy, cy + s * dx + c * dy))
    return out


def transform_points(points: list[Point], angle_deg: float, center: Point) -> list[Point]:
    """The exact content transform performed by apply_rotation(img, angle)."""
    return rotate_points(points, -angle_deg, center)


def apply_rotation(img: Image8, angle_deg: float) -> Image8:
    """Rotate image content about the center by -angle (undo a measured tilt).

    Output dimensions equal input dimensions; samples falling outside the
    source frame contribute zero (zero-padded bilinear).
    """
    h, w = img.pixels.shape
    if angle_deg == 0.0:
        return Image8(img.pixels.copy())
    # Content rotates by -angle, so each destination pixel pulls from the
    # source rotated by +angle about the center.
    t = math.radians(angle_deg)
    c, s = math.cos(t), math.sin(t)
    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0

    xs = np.arange(w, dtype=np.float64) - cx
    ys = np.arange(h, dtype=np.float64) - cy
    gx, gy = np.meshgrid(xs, ys)
    src_x = cx + c * gx - s * gy
    src_y = cy + s * gx + c * gy

    x0 = np.floor(src_x).astype(np.int64)
    y0 = np.floor(src_y).astype(np.int64)
    fx = src_x - x0
    fy = src_y - y0

    src = img.pixels.astype(np.float64)
    acc = np.zeros((h, w), dtype=np.float64)
    for dy_n, dx_n, wgt in (
        (0, 0, (1 - fx) * (1 - fy)),
        (0, 1, fx * (1 - fy)),
        (1, 0, (1 - fx) * fy),
        (1, 1, fx * fy),
    ):
        xi = x0 + dx_n
        yi = y0 + dy_n
        valid = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
        vals = np.where(valid, src[np.clip(yi, 0, h - 1), np.clip(xi, 0, w - 1)], 0.0)
        acc += wgt * vals
    return Image8(np.clip(np.rint(acc), 0, 255).astype(np.uint8))


def flip_horizontal(kp: KeypointSet, width: int) -> KeypointSet:
    """Mirror a landmark set; the clavicle roles swap so anatomy stays labeled."""
    def m(p: Point) -> Point:
        return (width - 1 - p[0], p[1])

    return KeypointSet(
        left_clavicle=m(kp.right_clavicle),
        right_clavicle=m(kp.left_clavicle),
        spine=tuple(m(p) for p in kp.spine),
    )
