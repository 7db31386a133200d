"""Byte-level parser/serializer tests, including a full roundtrip property."""
import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cxr_triage.ingest.dicom import (
    MalformedElement,
    MissingMagic,
    MissingPixelData,
    UnsupportedTransferSyntax,
    parse_dicom,
    serialize_dicom,
)
from cxr_triage.ingest.image import RawImage
from cxr_triage.ingest.metadata import (
    MachineType,
    Manufacturer,
    Sex,
    StudyMetadata,
    ViewHint,
    normalize_machine_type,
)

LONG_VRS = {b"OB", b"OD", b"OF", b"OL", b"OV", b"OW", b"SQ", b"UC", b"UN", b"UR", b"UT"}


def elem(group: int, el: int, vr: bytes, value: bytes) -> bytes:
    head = struct.pack("<HH", group, el) + vr
    if vr in LONG_VRS:
        return head + b"\x00\x00" + struct.pack("<I", len(value)) + value
    return head + struct.pack("<H", len(value)) + value


def ts_element(uid: str = "1.2.840.10008.1.2.1") -> bytes:
    raw = uid.encode()
    if len(raw) % 2:
        raw += b"\x00"
    return elem(0x0002, 0x0010, b"UI", raw)


def dicm(*parts: bytes) -> bytes:
    return b"\x00" * 128 + b"DICM" + b"".join(parts)


def us(group: int, el: int, value: int) -> bytes:
    return elem(group, el, b"US", struct.pack("<H", value))


def pixel_elem(rows: int, cols: int, fill: int = 7) -> bytes:
    payload = np.full((rows, cols), fill, dtype="<u2").tobytes()
    return elem(0x7FE0, 0x0010, b"OW", payload)


def minimal_stream(rows: int = 2, cols: int = 3, **kw) -> bytes:
    parts = [
        ts_element(),
        us(0x0028, 0x0010, kw.get("rows_tag", rows)),
        us(0x0028, 0x0011, kw.get("cols_tag", cols)),
        us(0x0028, 0x0100, kw.get("bits_alloc", 16)),
        us(0x0028, 0x0101, kw.get("bits_stored", 12)),
    ]
    if kw.get("samples") is not None:
        parts.insert(1, us(0x0028, 0x0002, kw["samples"]))
    if kw.get("with_pixels", True):
        parts.append(pixel_elem(rows, cols))
    return dicm(*parts)


class TestMalformedStreams:
    def test_missing_magic(self):
        for blob in (b"", b"\x00" * 131, b"\x00" * 128 + b"DICX" + b"rest"):
            with pytest.raises(MissingMagic):
                parse_dicom(blob)

    def test_truncated_header(self):
        blob = dicm(ts_element(), struct.pack("<HH", 0x0008, 0x0020))
        with pytest.raises(MalformedElement):
            parse_dicom(blob)

    def test_value_overruns_file(self):
        bad = struct.pack("<HH", 0x0008, 0x0020) + b"DA" + struct.pack("<H", 100) + b"2024"
        with pytest.raises(MalformedElement):
            parse_dicom(dicm(ts_element(), bad))

    def test_undefined_length_rejected(self):
        bad = struct.pack("<HH", 0x7FE0, 0x0010) + b"OW" + b"\x00\x00" + struct.pack("<I", 0xFFFFFFFF)
        with pytest.raises(MalformedElement):
            parse_dicom(dicm(ts_element(), bad))

    def test_implicit_vr_is_reported_as_syntax_problem(self):
        # tag then a 4-byte length where the VR letters should be
        implicit = struct.pack("<HHI", 0x0008, 0x0020, 8) + b"20240101"
        with pytest.raises(UnsupportedTransferSyntax):
            parse_dicom(dicm(implicit))

    def test_bad_vr_after_declaration(self):
        bad = struct.pack("<HH", 0x0008, 0x0020) + b"d@" + struct.pack("<H", 0)
        with pytest.raises(MalformedElement):
            parse_dicom(dicm(ts_element(), bad))

    def test_unsupported_transfer_syntax_uid(self):
        blob = dicm(ts_element("1.2.840.10008.1.2"), pixel_elem(1, 1))
        with pytest.raises(UnsupportedTransferSyntax) as exc:
            parse_dicom(blob)
        assert exc.value.uid == "1.2.840.10008.1.2"

    def test_missing_pixel_data(self):
        with pytest.raises(MissingPixelData):
            parse_dicom(minimal_stream(with_pixels=False))

    def test_zero_rows(self):
        with pytest.raises(MalformedElement):
            parse_dicom(minimal_stream(rows_tag=0))

    def test_multisample_rejected(self):
        with pytest.raises(MalformedElement):
            parse_dicom(minimal_stream(samples=3))

    def test_odd_bits_allocated_rejected(self):
        with pytest.raises(MalformedElement):
            parse_dicom(minimal_stream(bits_alloc=12))

    def test_short_pixel_payload(self):
        blob = minimal_stream(rows_tag=50, cols_tag=50)  # actual payload is 2x3
        with pytest.raises(MalformedElement):
            parse_dicom(blob)


def test_minimal_stream_parses():
    meta, raw = parse_dicom(minimal_stream())
    assert raw.pixels.shape == (2, 3)
    assert raw.bits_stored == 12
    assert meta.study_id.startswith("unidentified-")
    # fallback id is a pure function of the bytes
    meta2, _ = parse_dicom(minimal_stream())
    assert meta2.study_id == meta.study_id


def test_age_and_sex_coding():
    px = np.ones((2, 2), dtype=np.uint16)
    meta = StudyMetadata(study_id="9.8.7", patient_age_years=7, sex=Sex.FEMALE)
    got, _ = parse_dicom(serialize_dicom(meta, RawImage(pixels=px, bits_stored=10)))
    assert got.patient_age_years == 7
    assert got.sex is Sex.FEMALE
    assert got.study_id == "9.8.7"


def test_anonymized_id_roundtrips_with_flag():
    px = np.ones((2, 2), dtype=np.uint16)
    meta = StudyMetadata(study_id="anon-" + "ab" * 16, anonymized=True)
    got, _ = parse_dicom(serialize_dicom(meta, RawImage(pixels=px, bits_stored=12)))
    assert got.study_id == meta.study_id
    assert got.anonymized


uids = st.from_regex(r"[1-9][0-9.]{0,18}[0-9]", fullmatch=True)
names = st.text(
    alphabet=st.characters(min_codepoint=0x21, max_codepoint=0x7E), min_size=1, max_size=12
)
dates = st.dates().map(lambda d: d.strftime("%Y%m%d"))


@st.composite
def metadata_strategy(draw):
    modality = draw(st.sampled_from(["CR", "DX", "DR", ""]))
    acquired = draw(
        st.one_of(st.just(""), dates, st.tuples(dates, st.just("T101500")).map("".join))
    )
    identifiers = {}
    for key in ("patient_name", "patient_id", "patient_address"):
        if draw(st.booleans()):
            identifiers[key] = draw(names)
    return StudyMetadata(
        study_id=draw(uids),
        patient_age_years=draw(st.one_of(st.none(), st.integers(0, 130))),
        sex=draw(st.sampled_from(list(Sex))),
        manufacturer=draw(st.sampled_from(list(Manufacturer))),
        machine_type=normalize_machine_type(modality),
        modality=modality,
        view_hint=draw(st.sampled_from(list(ViewHint))),
        acquired_at=acquired,
        identifiers=identifiers,
    )


@st.composite
def raster_strategy(draw):
    bits = draw(st.integers(8, 16))
    h = draw(st.integers(1, 12))
    w = draw(st.integers(1, 12))
    top = (1 << bits) - 1
    seed = draw(st.integers(0, 2**31 - 1))
    rng = np.random.default_rng(seed)
    px = rng.integers(0, top + 1, size=(h, w), dtype=np.uint16)
    photometric = draw(st.sampled_from(["MONOCHROME1", "MONOCHROME2"]))
    return RawImage(pixels=px, bits_stored=bits, photometric=photometric)


@settings(max_examples=60, deadline=None)
@given(metadata_strategy(), raster_strategy())
def test_serialize_parse_roundtrip(meta, raw):
    got_meta, got_raw = parse_dicom(serialize_dicom(meta, raw))
    assert got_meta == meta
    assert np.array_equal(got_raw.pixels, raw.pixels)
    assert got_raw.bits_stored == raw.bits_stored
    assert got_raw.photometric == raw.photometric
