import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra import numpy as hnp

from cxr_triage.ingest.image import (
    EmptyImage,
    Image8,
    MONOCHROME1,
    RawImage,
    UnsupportedBitDepth,
    image_digest,
    read_pgm,
    to_eight_bit,
    write_pgm,
)


def test_raw_image_validation():
    with pytest.raises(EmptyImage):
        RawImage(pixels=np.zeros((0, 4), dtype=np.uint16), bits_stored=12)
    with pytest.raises(EmptyImage):
        RawImage(pixels=np.zeros(16, dtype=np.uint16), bits_stored=12)
    with pytest.raises(UnsupportedBitDepth):
        RawImage(pixels=np.ones((2, 2), dtype=np.uint16), bits_stored=7)
    with pytest.raises(UnsupportedBitDepth):
        RawImage(pixels=np.ones((2, 2), dtype=np.uint16), bits_stored=17)


def test_image8_requires_uint8():
    with pytest.raises(TypeError):
        Image8(np.zeros((2, 2), dtype=np.uint16))


def test_to_eight_bit_minmax_window():
    raw = RawImage(pixels=np.array([[100, 400], [500, 100]], dtype=np.uint16), bits_stored=12)
    out = to_eight_bit(raw)
    # min -> 0, max -> 255, interior linear: (400-100)/400 * 255 = 191.25
    assert out.pixels[0, 0] == 0
    assert out.pixels[1, 0] == 255
    assert out.pixels[0, 1] == 191


def test_to_eight_bit_constant_is_zero():
    raw = RawImage(pixels=np.full((3, 3), 777, dtype=np.uint16), bits_stored=12)
    assert not to_eight_bit(raw).pixels.any()


def test_to_eight_bit_inverts_monochrome1():
    px = np.array([[0, 1000], [2000, 4000]], dtype=np.uint16)
    plain = to_eight_bit(RawImage(pixels=px, bits_stored=12))
    flipped = to_eight_bit(RawImage(pixels=px, bits_stored=12, photometric=MONOCHROME1))
    assert np.array_equal(flipped.pixels, 255 - plain.pixels)


@given(
    hnp.arrays(dtype=np.uint16, shape=hnp.array_shapes(min_dims=2, max_dims=2, min_side=1, max_side=16))
)
def test_to_eight_bit_range_and_extremes(px):
    out = to_eight_bit(RawImage(pixels=px, bits_stored=16))
    assert out.pixels.dtype == np.uint8
    if px.min() != px.max():
        assert out.pixels.min() == 0
        assert out.pixels.max() == 255


def test_image_digest_sensitive_to_content_and_geometry():
    a = Image8(np.arange(12, dtype=np.uint8).reshape(3, 4))
    b = Image8(np.arange(12, dtype=np.uint8).reshape(4, 3))
    c = Image8(np.arange(12, dtype=np.uint8).reshape(3, 4).copy())
    c.pixels[0, 0] ^= 1
    assert image_digest(a) != image_digest(b)
    assert image_digest(a) != image_digest(c)
    assert image_digest(a) == image_digest(Image8(np.arange(12, dtype=np.uint8).reshape(3, 4)))


def test_pgm_roundtrip():
    rng = np.random.default_rng(3)
    img = Image8(rng.integers(0, 256, size=(7, 5), dtype=np.uint8))
    again = read_pgm(write_pgm(img))
    assert np.array_equal(again.pixels, img.pixels)


def test_read_pgm_rejects_garbage():
    with pytest.raises(ValueError):
        read_pgm(b"P6\n1 1\n255\n\x00")
    with pytest.raises(ValueError):
        read_pgm(b"P5\n4 4\n255\n\x00\x00")
