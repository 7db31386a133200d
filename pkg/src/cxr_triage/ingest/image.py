"""Raster types and the 16-bit to 8-bit display conversion."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

MONOCHROME1 = "MONOCHROME1"
MONOCHROME2 = "MONOCHROME2"


class EmptyImage(ValueError):
    """Zero-area raster."""


class UnsupportedBitDepth(ValueError):
    """bits_stored outside [8, 16]."""


@dataclass(frozen=True)
class RawImage:
    """Grayscale raster as stored on disk: row-major uint16, 8-16 bits used."""

    pixels: np.ndarray  # shape (h, w), dtype uint16
    bits_stored: int
    photometric: str = MONOCHROME2

    def __post_init__(self) -> None:
        if self.pixels.ndim != 2 or self.pixels.size == 0:
            raise EmptyImage(f"shape {self.pixels.shape}")
        if not 8 <= self.bits_stored <= 16:
            raise UnsupportedBitDepth(f"bits_stored {self.bits_stored}")
        if self.pixels.dtype != np.uint16:
            object.__setattr__(self, "pixels", self.pixels.astype(np.uint16))

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])


@dataclass(frozen=True)
class Image8:
    """8-bit grayscale working raster, white = air convention."""

    pixels: np.ndarray  # shape (h, w), dtype uint8

    def __post_init__(self) -> None:
        if self.pixels.ndim != 2 or self.pixels.size == 0:
            raise EmptyImage(f"shape {self.pixels.shape}")
        if self.pixels.dtype != np.uint8:
            raise TypeError(f"Image8 wants uint8, got {self.pixels.dtype}")

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])


def to_eight_bit(raw: RawImage) -> Image8:
    """Window a stored raster to display range with a min-max window.

    The observed min maps to 0 and the observed max to 255 (monotone for
    MONOCHROME2). MONOCHROME1 rasters (low = bright) are inverted so the
    output convention is uniform. A constant image maps to all zeros.
    """
    px = raw.pixels.astype(np.float64)
    lo = float(px.min())
    hi = float(px.max())
    if hi == lo:
        out = np.zeros(raw.pixels.shape, dtype=np.uint8)
        return Image8(out)
    scaled = np.rint((px - lo) * (255.0 / (hi - lo)))
    out = np.clip(scaled, 0, 255).astype(np.uint8)
    if raw.photometric == MONOCHROME1:
        out = (255 - out).astype(np.uint8)
    return Image8(out)


def image_digest(img: Image8) -> str:
    """Content digest of an 8-bit raster (geometry + pixel bytes)."""
    h = hashlib.sha256()
    h.update(f"img8:{img.width}x{img.height}:".encode())
    h.update(np.ascontiguousarray(img.pixels).tobytes())
    return h.hexdigest()


def write_pgm(img: Image8) -> bytes:
    """Binary PGM (P5) encoding, used for debug dumps and stored display blobs."""
    header = f"P5\n{img.width} {img.height}\n255\n".encode()
    return header + np.ascontiguousarray(img.pixels).tobytes()


def read_pgm(data: bytes) -> Image8:
    """Parse a binary PGM produced by write_pgm (no comment support)."""
    parts = data.split(b"\n", 3)
    if len(parts) < 4 or parts[0] != b"P5":
        raise ValueError("not a binary PGM")
    w, h = (int(t) for t in parts[1].split())
    maxval = int(parts[2])
    if maxval != 255:
        raise ValueError(f"unsupported maxval {maxval}")
    px = np.frombuffer(parts[3][: w * h], dtype=np.uint8)
    if px.size != w * h:
        raise ValueError("truncated PGM payload")
    return Image8(px.reshape(h, w).copy())
