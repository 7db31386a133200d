"""Study metadata: typed attributes, normalisation, and anonymisation.

Free-text attribute values coming off scanner exports are collapsed onto
closed enums here so that downstream grouping (worklists, subgroup reports)
never sees unbounded strings.
"""
from __future__ import annotations

import enum
import hashlib
import re
from dataclasses import dataclass, field, replace

MAX_AGE_YEARS = 130


class Sex(str, enum.Enum):
    MALE = "Male"
    FEMALE = "Female"
    UNKNOWN = "Unknown"


class Manufacturer(str, enum.Enum):
    GE = "GEHealthcare"
    SIEMENS = "Siemens"
    PHILIPS = "Philips"
    OTHER = "Other"


class MachineType(str, enum.Enum):
    CR = "CR"
    DR = "DR"
    UNKNOWN = "Unknown"


class ViewHint(str, enum.Enum):
    PA = "PA"
    AP = "AP"
    UNKNOWN = "Unknown"


class AgeBand(str, enum.Enum):
    UNDER_18 = "Under18"
    A18_40 = "A18to40"
    A40_60 = "A40to60"
    A60_75 = "A60to75"
    A75_PLUS = "A75plus"


class NegativeAge(ValueError):
    """Age in years must be a non-negative number."""


class InvalidAge(ValueError):
    """Age string or value outside the representable range."""


@dataclass(frozen=True)
class StudyMetadata:
    study_id: str
    patient_age_years: int | None = None
    sex: Sex = Sex.UNKNOWN
    manufacturer: Manufacturer = Manufacturer.OTHER
    machine_type: MachineType = MachineType.UNKNOWN
    modality: str = ""
    view_hint: ViewHint = ViewHint.UNKNOWN
    acquired_at: str = ""
    # Direct identifiers (patient name/ID/address) kept out of the typed
    # surface; anonymize() empties this dict.
    identifiers: dict[str, str] = field(default_factory=dict)
    anonymized: bool = False

    def __post_init__(self) -> None:
        if self.patient_age_years is not None:
            if self.patient_age_years < 0:
                raise NegativeAge(f"age {self.patient_age_years}")
            if self.patient_age_years > MAX_AGE_YEARS:
                raise InvalidAge(f"age {self.patient_age_years} exceeds {MAX_AGE_YEARS}")


_AGE_RE = re.compile(r"^(\d{1,4})([DWMY])$")


def parse_age_string(value: str) -> int | None:
    """Parse an age string like ``045Y``/``018M``/``010W``/``100D``.

    Sub-year units floor-divide to whole years (D//365, W//52, M//12).
    A bare integer is taken as years. Unparseable or out-of-range values
    return None (the attribute is optional, not an ingest failure).
    """
    value = value.strip().upper()
    if not value:
        return None
    m = _AGE_RE.match(value)
    if m:
        n = int(m.group(1))
        unit = m.group(2)
        years = {"D": n // 365, "W": n // 52, "M": n // 12, "Y": n}[unit]
    elif value.isdigit():
        years = int(value)
    else:
        return None
    if years > MAX_AGE_YEARS:
        return None
    return years


def age_band(age_years: int | float) -> AgeBand:
    """Partition an age into the reporting bands [0,18), [18,40), [40,60), [60,75), [75,inf)."""
    if age_years < 0:
        raise NegativeAge(f"age {age_years}")
    if age_years < 18:
        return AgeBand.UNDER_18
    if age_years < 40:
        return AgeBand.A18_40
    if age_years < 60:
        return AgeBand.A40_60
    if age_years < 75:
        return AgeBand.A60_75
    return AgeBand.A75_PLUS


def normalize_sex(value: str) -> Sex:
    v = value.strip().upper()
    if v == "M":
        return Sex.MALE
    if v == "F":
        return Sex.FEMALE
    return Sex.UNKNOWN


def normalize_manufacturer(value: str) -> Manufacturer:
    """Case-insensitive prefix match against the three named vendors, else Other."""
    v = value.strip().upper()
    if v.startswith("GE"):
        return Manufacturer.GE
    if v.startswith("SIEMENS"):
        return Manufacturer.SIEMENS
    if v.startswith("PHILIPS"):
        return Manufacturer.PHILIPS
    return Manufacturer.OTHER


def normalize_machine_type(modality: str) -> MachineType:
    v = modality.strip().upper()
    if v == "CR":
        return MachineType.CR
    if v in ("DX", "DR"):
        return MachineType.DR
    return MachineType.UNKNOWN


def normalize_view_hint(value: str) -> ViewHint:
    v = value.strip().upper()
    if v == "PA":
        return ViewHint.PA
    if v == "AP":
        return ViewHint.AP
    return ViewHint.UNKNOWN


_ANON_PREFIX = "anon-"


def anonymize(meta: StudyMetadata, salt: str) -> StudyMetadata:
    """Replace the study id with a salted one-way digest and drop identifiers.

    Idempotent: an already-anonymized record passes through unchanged, so
    re-running ingest never double-hashes ids. Subgroup attributes (age,
    sex, manufacturer, machine type) are preserved.
    """
    if meta.anonymized:
        return meta
    digest = hashlib.sha256((salt + ":" + meta.study_id).encode()).hexdigest()
    return replace(
        meta,
        study_id=_ANON_PREFIX + digest[:32],
        identifiers={},
        anonymized=True,
    )
