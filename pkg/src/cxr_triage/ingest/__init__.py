"""DICOM ingest: parsing, anonymisation, display conversion, attribute taxonomy."""
from .dicom import (
    DicomError,
    MalformedElement,
    MissingMagic,
    MissingPixelData,
    UnsupportedTransferSyntax,
    parse_dicom,
    serialize_dicom,
)
from .image import (
    EmptyImage,
    Image8,
    RawImage,
    UnsupportedBitDepth,
    image_digest,
    read_pgm,
    to_eight_bit,
    write_pgm,
)
from .metadata import (
    AgeBand,
    InvalidAge,
    MachineType,
    Manufacturer,
    NegativeAge,
    Sex,
    StudyMetadata,
    ViewHint,
    age_band,
    anonymize,
    normalize_machine_type,
    normalize_manufacturer,
    normalize_sex,
    normalize_view_hint,
    parse_age_string,
)

__all__ = [
    "AgeBand",
    "DicomError",
    "EmptyImage",
    "Image8",
    "InvalidAge",
    "MachineType",
    "MalformedElement",
    "Manufacturer",
    "MissingMagic",
    "MissingPixelData",
    "NegativeAge",
    "RawImage",
    "Sex",
    "StudyMetadata",
    "UnsupportedBitDepth",
    "UnsupportedTransferSyntax",
    "ViewHint",
    "age_band",
    "anonymize",
    "image_digest",
    "normalize_machine_type",
    "normalize_manufacturer",
    "normalize_sex",
    "normalize_view_hint",
    "parse_age_string",
    "parse_dicom",
    "read_pgm",
    "serialize_dicom",
    "to_eight_bit",
    "write_pgm",
]
