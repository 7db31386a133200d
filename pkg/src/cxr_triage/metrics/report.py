"""Report assembly and rendering (CSV / Markdown).

Percentages live in [0, 100] and AUCs in [0, 1]; anything outside is
rejected at construction with MetricRangeError, which is the gate that
keeps transcription errors out of rendered tables. Pathology rows always
render in the canonical vocabulary order.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from ..labels import canonical_index, resolve_label


class MetricRangeError(ValueError):
    def __init__(self, what: str, value: float, lo: float, hi: float):
        super().__init__(f"{what} = {value} outside [{lo}, {hi}]")
        self.what = what
        self.value = value


def _check_range(what: str, value: float | None, lo: float, hi: float) -> None:
    if value is not None and not lo <= value <= hi:
        raise MetricRangeError(what, value, lo, hi)


@dataclass(frozen=True)
class PathologyRow:
    label: str
    auc: float | None
    precision_pct: float | None
    recall_pct: float | None

    def __post_init__(self) -> None:
        object.__setattr__(self, "label", resolve_label(self.label))
        _check_range("auc", self.auc, 0.0, 1.0)
        _check_range("precision", self.precision_pct, 0.0, 100.0)
        _check_range("recall", self.recall_pct, 0.0, 100.0)


@dataclass(frozen=True)
class SubgroupRow:
    group: str
    n: int
    auc: float | None
    accuracy_pct: float | None
    precision_pct: float | None
    recall_pct: float | None
    sensitivity_pct: float | None
    specificity_pct: float | None

    def __post_init__(self) -> None:
        if self.n < 0:
            raise ValueError(f"n {self.n}")
        _check_range("auc", self.auc, 0.0, 1.0)
        for name in ("accuracy", "precision", "recall", "sensitivity", "specificity"):
            _check_range(name, getattr(self, f"{name}_pct"), 0.0, 100.0)


@dataclass(frozen=True)
class ClassificationEntry:
    """One agreement rate with its confidence interval, as fractions."""

    value: float
    ci_lower: float
    ci_upper: float

    def __post_init__(self) -> None:
        _check_range("value", self.value, 0.0, 1.0)
        _check_range("ci_lower", self.ci_lower, 0.0, 1.0)
        _check_range("ci_upper", self.ci_upper, 0.0, 1.0)
        if not self.ci_lower <= self.ci_upper:
            raise MetricRangeError("ci_lower", self.ci_lower, 0.0, self.ci_upper)


@dataclass
class MetricReport:
    pathology_rows: list[PathologyRow] = field(default_factory=list)
    classification: dict[str, ClassificationEntry] = field(default_factory=dict)
    subgroups: dict[str, list[SubgroupRow]] = field(default_factory=dict)
    notices: list[str] = field(default_factory=list)

    def sorted_pathology_rows(self) -> list[PathologyRow]:
        return sorted(self.pathology_rows, key=lambda r: canonical_index(r.label))


PATHOLOGY_HEADER = ("Pathology", "AUC", "Precision (%)", "Recall (%)")
CLASSIFICATION_HEADER = ("Metric", "Value (%)", "CI Lower (%)", "CI Upper (%)")
SUBGROUP_HEADER = (
    "Group",
    "N",
    "AUC",
    "Accuracy (%)",
    "Precision (%)",
    "Recall (%)",
    "Sensitivity (%)",
    "Specificity (%)",
)


def _fmt(value: float | None, missing: str) -> str:
    return missing if value is None else f"{value:.2f}"


def _pathology_cells(row: PathologyRow, missing: str) -> list[str]:
    return [
        row.label,
        _fmt(row.auc, missing),
        _fmt(row.precision_pct, missing),
        _fmt(row.recall_pct, missing),
    ]


def _subgroup_cells(row: SubgroupRow, missing: str) -> list[str]:
    return [
        row.group,
        str(row.n),
        _fmt(row.auc, missing),
        _fmt(row.accuracy_pct, missing),
        _fmt(row.precision_pct, missing),
        _fmt(row.recall_pct, missing),
        _fmt(row.sensitivity_pct, missing),
        _fmt(row.specificity_pct, missing),
    ]


def _classification_cells(name: str, entry: ClassificationEntry) -> list[str]:
    return [
        name.upper(),
        f"{entry.value * 100:.2f}",
        f"{entry.ci_lower * 100:.2f}",
        f"{entry.ci_upper * 100:.2f}",
    ]


def render_report(report: MetricReport, fmt: str = "csv") -> str:
    if fmt == "csv":
        return _render_csv(report)
    if fmt == "markdown":
        return _render_markdown(report)
    raise ValueError(f"unknown format {fmt!r}")


def _render_csv(report: MetricReport) -> str:
    lines: list[str] = []
    empty = not (report.pathology_rows or report.classification or report.subgroups)
    if report.pathology_rows or empty:
        lines.append(",".join(PATHOLOGY_HEADER))
        for row in report.sorted_pathology_rows():
            lines.append(",".join(_pathology_cells(row, "")))
    if report.classification:
        if lines:
            lines.append("")
        lines.append(",".join(CLASSIFICATION_HEADER))
        for name, entry in report.classification.items():
            lines.append(",".join(_classification_cells(name, entry)))
    for dimension, rows in report.subgroups.items():
        if lines:
            lines.append("")
        lines.append(f"# subgroup: {dimension}")
        lines.append(",".join(SUBGROUP_HEADER))
        for row in rows:
            lines.append(",".join(_subgroup_cells(row, "")))
    for notice in report.notices:
        lines.append(f"# {notice}")
    return "\n".join(lines) + "\n"


def _md_table(header: tuple[str, ...], rows: list[list[str]]) -> list[str]:
    out = ["| " + " | ".join(header) + " |", "|" + "|".join(" --- " for _ in header) + "|"]
    for cells in rows:
        out.append("| " + " | ".join(cells) + " |")
    return out


def report_to_dict(report: MetricReport) -> dict:
    """JSON-ready view of a report for API responses."""
    return {
        "pathology_rows": [
            {
                "label": r.label,
                "auc": r.auc,
                "precision_pct": r.precision_pct,
                "recall_pct": r.recall_pct,
            }
            for r in report.sorted_pathology_rows()
        ],
        "classification": {
            name: {"value": e.value, "ci_lower": e.ci_lower, "ci_upper": e.ci_upper}
            for name, e in report.classification.items()
        },
        "subgroups": {
            dim: [
                {
                    "group": r.group,
                    "n": r.n,
                    "auc": r.auc,
                    "accuracy_pct": r.accuracy_pct,
                    "precision_pct": r.precision_pct,
                    "recall_pct": r.recall_pct,
                    "sensitivity_pct": r.sensitivity_pct,
                    "specificity_pct": r.specificity_pct,
                }
                for r in rows
            ]
            for dim, rows in report.subgroups.items()
        },
        "notices": list(report.notices),
    }


def _render_markdown(report: MetricReport) -> str:
    parts: list[str] = []
    empty = not (report.pathology_rows or report.classification or report.subgroups)
    if report.pathology_rows or empty:
        parts.append("## Per-pathology detection")
        parts.extend(
            _md_table(
                PATHOLOGY_HEADER,
                [_pathology_cells(r, "-") for r in report.sorted_pathology_rows()],
            )
        )
    if report.classification:
        parts.append("")
        parts.append("## Classification agreement")
        parts.extend(
            _md_table(
                CLASSIFICATION_HEADER,
                [_classification_cells(n, e) for n, e in report.classification.items()],
            )
        )
    for dimension, rows in report.subgroups.items():
        parts.append("")
        parts.append(f"## Subgroup: {dimension}")
        parts.extend(_md_table(SUBGROUP_HEADER, [_subgroup_cells(r, "-") for r in rows]))
    if report.notices:
        parts.append("")
        for notice in report.notices:
            parts.append(f"*{notice}*")
    return "\n".join(parts).lstrip("\n") + "\n"
