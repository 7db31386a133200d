"""Minimal DICOM reader/writer for desk-scale chest X-ray ingest.

Scope: single-frame grayscale files in the explicit-VR little-endian
transfer syntax with uncompressed pixel data. Implicit VR, big-endian and
compressed syntaxes are rejected up front; sequence (SQ) payloads are
skipped when defined-length and rejected when undefined-length. The writer
emits exactly the tag subset the parser understands, which is what makes
the parse/serialize roundtrip testable without binary fixtures.
"""
from __future__ import annotations

import hashlib
import struct

import numpy as np

from .image import MONOCHROME2, RawImage
from .metadata import (
    StudyMetadata,
    normalize_machine_type,
    normalize_manufacturer,
    normalize_sex,
    normalize_view_hint,
    parse_age_string,
)

PREAMBLE_LEN = 128
MAGIC = b"DICM"

EXPLICIT_VR_LE = "1.2.840.10008.1.2.1"

# Tags we materialise into StudyMetadata / RawImage.
TAG_STUDY_DATE = (0x0008, 0x0020)
TAG_STUDY_TIME = (0x0008, 0x0030)
TAG_MODALITY = (0x0008, 0x0060)
TAG_MANUFACTURER = (0x0008, 0x0070)
TAG_PATIENT_NAME = (0x0010, 0x0010)
TAG_PATIENT_ID = (0x0010, 0x0020)
TAG_PATIENT_SEX = (0x0010, 0x0040)
TAG_PATIENT_AGE = (0x0010, 0x1010)
TAG_PATIENT_ADDRESS = (0x0010, 0x1040)
TAG_VIEW_POSITION = (0x0018, 0x5101)
TAG_STUDY_UID = (0x0020, 0x000D)
TAG_SAMPLES_PER_PIXEL = (0x0028, 0x0002)
TAG_PHOTOMETRIC = (0x0028, 0x0004)
TAG_ROWS = (0x0028, 0x0010)
TAG_COLS = (0x0028, 0x0011)
TAG_BITS_ALLOCATED = (0x0028, 0x0100)
TAG_BITS_STORED = (0x0028, 0x0101)
TAG_TRANSFER_SYNTAX = (0x0002, 0x0010)
TAG_PIXEL_DATA = (0x7FE0, 0x0010)

# VRs that use the 12-byte header (2 reserved bytes + 32-bit length).
_LONG_VRS = {b"OB", b"OD", b"OF", b"OL", b"OV", b"OW", b"SQ", b"UC", b"UN", b"UR", b"UT"}
_UNDEFINED_LEN = 0xFFFFFFFF


class DicomError(ValueError):
    pass


class MissingMagic(DicomError):
    """No DICM marker after the 128-byte preamble."""


class UnsupportedTransferSyntax(DicomError):
    def __init__(self, uid: str):
        super().__init__(f"unsupported transfer syntax {uid!r}")
        self.uid = uid


class MissingPixelData(DicomError):
    pass


class MalformedElement(DicomError):
    def __init__(self, offset: int, why: str):
        super().__init__(f"malformed element at offset {offset}: {why}")
        self.offset = offset


def _read_element(data: bytes, off: int, declared: bool) -> tuple[tuple[int, int], bytes, int, int]:
    """Decode one explicit-VR element header; returns (tag, vr, value_off, value_len)."""
    if off + 8 > len(data):
        raise MalformedElement(off, "truncated element header")
    group, elem = struct.unpack_from("<HH", data, off)
    vr = data[off + 4 : off + 6]
    if not (vr.isalpha() and vr.isupper()):
        # Two non-letter bytes where a VR should sit means the stream is not
        # explicit VR. Before a syntax is declared, call it what it is.
        if not declared:
            raise UnsupportedTransferSyntax("<undeclared, not explicit VR>")
        raise MalformedElement(off, f"bad VR bytes {vr!r}")
    if vr in _LONG_VRS:
        if off + 12 > len(data):
            raise MalformedElement(off, "truncated long header")
        (length,) = struct.unpack_from("<I", data, off + 8)
        value_off = off + 12
    else:
        (length,) = struct.unpack_from("<H", data, off + 6)
        value_off = off + 8
    if length == _UNDEFINED_LEN:
        raise MalformedElement(off, "undefined length not supported")
    if value_off + length > len(data):
        raise MalformedElement(off, f"value overruns file (len={length})")
    return (group, elem), vr, value_off, length


def _text(data: bytes, off: int, length: int) -> str:
    return data[off : off + length].decode("ascii", errors="replace").rstrip(" \x00")


def _us(data: bytes, off: int, length: int, abs_off: int) -> int:
    if length != 2:
        raise MalformedElement(abs_off, f"US length {length}")
    return struct.unpack_from("<H", data, off)[0]


def parse_dicom(data: bytes) -> tuple[StudyMetadata, RawImage]:
    """Parse a DICOM byte stream into normalised metadata and the stored raster.

    Raises MissingMagic / UnsupportedTransferSyntax / MissingPixelData /
    MalformedElement; anything else about the stream (odd geometry, sample
    layout) is reported as MalformedElement with the offending offset.
    """
    if len(data) < PREAMBLE_LEN + 4 or data[PREAMBLE_LEN : PREAMBLE_LEN + 4] != MAGIC:
        raise MissingMagic("no DICM marker at offset 128")

    off = PREAMBLE_LEN + 4
    declared = False

    # File meta group (0002) if present. Only the transfer syntax matters.
    while off < len(data):
        if off + 8 > len(data):
            raise MalformedElement(off, "trailing bytes shorter than a header")
        group = struct.unpack_from("<H", data, off)[0]
        if group != 0x0002:
            break
        tag, vr, voff, vlen = _read_element(data, off, declared=True)
        if tag == TAG_TRANSFER_SYNTAX:
            uid = _text(data, voff, vlen)
            if uid != EXPLICIT_VR_LE:
                raise UnsupportedTransferSyntax(uid)
            declared = True
        off = voff + vlen

    fields: dict[tuple[int, int], tuple[int, int]] = {}
    pixel_span: tuple[int, int] | None = None
    while off < len(data):
        tag, vr, voff, vlen = _read_element(data, off, declared)
        declared = True  # parsed at least one well-formed explicit element
        if tag == TAG_PIXEL_DATA:
            pixel_span = (voff, vlen)
        else:
            fields[tag] = (voff, vlen)
        off = voff + vlen

    if pixel_span is None:
        raise MissingPixelData("no (7FE0,0010) element")

    def text_of(tag: tuple[int, int]) -> str:
        if tag not in fields:
            return ""
        voff, vlen = fields[tag]
        return _text(data, voff, vlen)

    def us_of(tag: tuple[int, int], default: int | None = None) -> int | None:
        if tag not in fields:
            return default
        voff, vlen = fields[tag]
        return _us(data, voff, vlen, voff - 8)

    rows = us_of(TAG_ROWS)
    cols = us_of(TAG_COLS)
    if rows is None or cols is None or rows == 0 or cols == 0:
        raise MalformedElement(pixel_span[0], "missing or zero Rows/Columns")
    samples = us_of(TAG_SAMPLES_PER_PIXEL, 1)
    if samples != 1:
        raise MalformedElement(pixel_span[0], f"SamplesPerPixel {samples} unsupported")
    bits_alloc = us_of(TAG_BITS_ALLOCATED, 16)
    if bits_alloc not in (8, 16):
        raise MalformedElement(pixel_span[0], f"BitsAllocated {bits_alloc} unsupported")
    bits_stored = us_of(TAG_BITS_STORED, bits_alloc)

    voff, vlen = pixel_span
    need = rows * cols * (bits_alloc // 8)
    if vlen < need:
        raise MalformedElement(voff, f"pixel data {vlen} bytes < expected {need}")
    if bits_alloc == 16:
        px = np.frombuffer(data, dtype="<u2", count=rows * cols, offset=voff)
        px = px.astype(np.uint16).reshape(rows, cols)
    else:
        px = np.frombuffer(data, dtype=np.uint8, count=rows * cols, offset=voff)
        px = px.astype(np.uint16).reshape(rows, cols)

    photometric = text_of(TAG_PHOTOMETRIC) or MONOCHROME2
    raw = RawImage(pixels=px, bits_stored=int(bits_stored), photometric=photometric)

    study_uid = text_of(TAG_STUDY_UID)
    if not study_uid:
        study_uid = "unidentified-" + hashlib.sha256(data).hexdigest()[:16]

    identifiers: dict[str, str] = {}
    for key, tag in (
        ("patient_name", TAG_PATIENT_NAME),
        ("patient_id", TAG_PATIENT_ID),
        ("patient_address", TAG_PATIENT_ADDRESS),
    ):
        value = text_of(tag)
        if value:
            identifiers[key] = value

    date = text_of(TAG_STUDY_DATE)
    time = text_of(TAG_STUDY_TIME)
    acquired_at = date + ("T" + time if time else "")
    modality = text_of(TAG_MODALITY)

    meta = StudyMetadata(
        study_id=study_uid,
        patient_age_years=parse_age_string(text_of(TAG_PATIENT_AGE)),
        sex=normalize_sex(text_of(TAG_PATIENT_SEX)),
        manufacturer=normalize_manufacturer(text_of(TAG_MANUFACTURER)),
        machine_type=normalize_machine_type(modality),
        modality=modality,
        view_hint=normalize_view_hint(text_of(TAG_VIEW_POSITION)),
        acquired_at=acquired_at,
        identifiers=identifiers,
        anonymized=study_uid.startswith("anon-"),
    )
    return meta, raw


def _pad(value: bytes, pad: bytes) -> bytes:
    return value + pad if len(value) % 2 else value


def _element(tag: tuple[int, int], vr: bytes, value: bytes) -> bytes:
    head = struct.pack("<HH", tag[0], tag[1]) + vr
    if vr in _LONG_VRS:
        return head + b"\x00\x00" + struct.pack("<I", len(value)) + value
    return head + struct.pack("<H", len(value)) + value


def serialize_dicom(meta: StudyMetadata, raw: RawImage) -> bytes:
    """Write an explicit-VR little-endian file covering the supported tag subset.

    parse_dicom(serialize_dicom(m, img)) recovers (m, img) exactly for any
    normalised metadata (enum-coded attributes are written in their coded
    form, e.g. sex as M/F). UID charset is not validated, so anonymized ids
    roundtrip too.
    """
    out = bytearray(b"\x00" * PREAMBLE_LEN + MAGIC)

    meta_group = _element(TAG_TRANSFER_SYNTAX, b"UI", _pad(EXPLICIT_VR_LE.encode(), b"\x00"))
    out += _element((0x0002, 0x0000), b"UL", struct.pack("<I", len(meta_group)))
    out += meta_group

    def put_text(tag: tuple[int, int], vr: bytes, value: str) -> None:
        if value:
            pad = b"\x00" if vr == b"UI" else b" "
            out.extend(_element(tag, vr, _pad(value.encode("ascii"), pad)))

    date, _, time = meta.acquired_at.partition("T")
    put_text(TAG_STUDY_DATE, b"DA", date)
    put_text(TAG_STUDY_TIME, b"TM", time)
    put_text(TAG_MODALITY, b"CS", meta.modality)
    put_text(TAG_MANUFACTURER, b"LO", meta.manufacturer.value)
    put_text(TAG_PATIENT_NAME, b"PN", meta.identifiers.get("patient_name", ""))
    put_text(TAG_PATIENT_ID, b"LO", meta.identifiers.get("patient_id", ""))
    sex_code = {"Male": "M", "Female": "F"}.get(meta.sex.value, "")
    put_text(TAG_PATIENT_SEX, b"CS", sex_code)
    if meta.patient_age_years is not None:
        put_text(TAG_PATIENT_AGE, b"AS", f"{meta.patient_age_years:03d}Y")
    put_text(TAG_PATIENT_ADDRESS, b"LO", meta.identifiers.get("patient_address", ""))
    view_code = meta.view_hint.value if meta.view_hint.value in ("PA", "AP") else ""
    put_text(TAG_VIEW_POSITION, b"CS", view_code)
    put_text(TAG_STUDY_UID, b"UI", meta.study_id)

    bits_alloc = 16 if raw.bits_stored > 8 else 8
    out.extend(_element(TAG_SAMPLES_PER_PIXEL, b"US", struct.pack("<H", 1)))
    put_text(TAG_PHOTOMETRIC, b"CS", raw.photometric)
    for tag, value in (
        (TAG_ROWS, raw.height),
        (TAG_COLS, raw.width),
        (TAG_BITS_ALLOCATED, bits_alloc),
        (TAG_BITS_STORED, raw.bits_stored),
    ):
        out.extend(_element(tag, b"US", struct.pack("<H", value)))

    if bits_alloc == 16:
        payload = raw.pixels.astype("<u2").tobytes()
    else:
        payload = raw.pixels.astype(np.uint8).tobytes()
    out.extend(_element(TAG_PIXEL_DATA, b"OW", _pad(payload, b"\x00")))
    return bytes(out)
