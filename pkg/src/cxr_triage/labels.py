"""Pathology label vocabulary.

The triage system reports against a fixed vocabulary of 75 chest X-ray
findings. Report tables always emit rows in the canonical order below
(case-insensitive alphabetical), and every alternate spelling seen in
upstream metric exports resolves onto a canonical name.
"""
from __future__ import annotations

CANONICAL_LABELS: tuple[str, ...] = (
    "Alveolar Lung Opacity",
    "Atelectasis",
    "Azygous Lobe",
    "Bifid Rib",
    "Bronchiectasis",
    "Bullous Emphysema",
    "Cardiomegaly",
    "Cavity",
    "Cervical Rib",
    "Clavicle Fracture",
    "Clavicle Fracture with PO",
    "Consolidation",
    "Dextrocardia",
    "Dextrocardia with situs inversus",
    "Diaphragmatic Hump",
    "Elevated Diaphragm",
    "Esophageal Stent",
    "Fibrosis",
    "Fissural Thickening",
    "Flattened Diaphragm",
    "Foreign Body - Cardiac Valves",
    "Foreign Body - Chemoport",
    "Foreign Body - Chest Leads",
    "Foreign Body - CV Line",
    "Foreign Body - Endotracheal tube",
    "Foreign Body - Intercostal",
    "Foreign Body - Nasogastric Tube",
    "Foreign Body - Nasojejunal Tube",
    "Foreign Body - Pacemaker",
    "Foreign Body - Pigtail Catheter",
    "Foreign Body - Spinal Fusion",
    "Foreign Body - Sternal Sutures",
    "Foreign Body - Tracheostomy Tube",
    "Hilar Lymphadenopathy",
    "Hilar Prominence",
    "Humerus Fracture",
    "Humerus Post OP",
    "Hydro Pneumothorax",
    "Hypoplastic Rib",
    "Interstitial Lung Disease",
    "Interstitial Lung Opacity",
    "Lobe Collapse",
    "Lung Collapse",
    "Lung Mass",
    "Lymph Node Calcification",
    "Mastectomy",
    "Mediastinal Mass",
    "Mediastinal Shift",
    "Mediastinal Widening",
    "Milliary Tuberculosis",
    "Nodule",
    "Old Healed Clavicle Fracture",
    "Old Rib Fracture",
    "Old Tuberculosis",
    "Pericardial Cyst",
    "Pleural Calcification",
    "Pleural Effusion",
    "Pleural Plaque",
    "Pleural Thickening",
    "Pneumonia",
    "Pneumoperitoneum",
    "Pneumothorax",
    "Prominent Bronchovascular Markings",
    "Pulmonary Edema",
    "Reticulo-nodular Appearance",
    "Rib Fracture",
    "Scapula Fracture",
    "Scoliosis",
    "Subcutaneous Emphysema",
    "Surgical Staples",
    "Thyroid Lesion",
    "Tracheal and Mediastinal Shift",
    "Tracheal Shift",
    "Tuberculosis",
    "Unfolding of Aorta",
)

# Alternate spellings used by exported metric tables. Keys are lowercased.
_ALIASES: dict[str, str] = {
    "foreign body - ett": "Foreign Body - Endotracheal tube",
    "foreign body - endotracheal tube": "Foreign Body - Endotracheal tube",
    "foreign body - icd": "Foreign Body - Intercostal",
    "foreign body - intercostal drain": "Foreign Body - Intercostal",
    "foreign body - ng tube": "Foreign Body - Nasogastric Tube",
    "foreign body - nj tube": "Foreign Body - Nasojejunal Tube",
    "ild": "Interstitial Lung Disease",
    "old tb": "Old Tuberculosis",
    "miliary tuberculosis": "Milliary Tuberculosis",
}

_BY_LOWER = {name.lower(): name for name in CANONICAL_LABELS}
_INDEX = {name: i for i, name in enumerate(CANONICAL_LABELS)}


class UnknownPathology(KeyError):
    """Raised when a label cannot be resolved onto the vocabulary."""


def resolve_label(name: str) -> str:
    """Map a label (canonical, alias, or case variant) to its canonical name."""
    key = " ".join(name.split()).lower()
    if key in _BY_LOWER:
        return _BY_LOWER[key]
    if key in _ALIASES:
        return _ALIASES[key]
    raise UnknownPathology(name)


def canonical_index(name: str) -> int:
    """Position of a (resolvable) label in the canonical report order."""
    return _INDEX[resolve_label(name)]


def is_known_label(name: str) -> bool:
    try:
        resolve_label(name)
    except UnknownPathology:
        return False
    return True


# Findings that escalate a study to the Critical worklist band by default.
DEFAULT_CRITICAL_LABELS: frozenset[str] = frozenset(
    {"Pneumothorax", "Hydro Pneumothorax", "Pneumoperitoneum"}
)
