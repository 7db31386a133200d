"""Study registry: status machine, worklist ordering, feedback, live metrics.

All state is derived from the event log (snapshot + replay), so a process
kill between an append and its acknowledgement loses nothing: the event is
either on disk (replay restores it) or was never acked. Feedback events are
deduplicated by event_id, which makes client retries harmless.
"""
from __future__ import annotations

import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from ..backends.base import Decision
from ..ingest.image import write_pgm
from ..metrics.agreement import agreement_metrics, confidence_interval, confusion, metric_counts
from ..metrics.ranking import SingleClass, auc
from ..metrics.records import DIMENSIONS, UnknownDimension
from ..metrics.report import ClassificationEntry, MetricReport, PathologyRow, SubgroupRow
from ..labels import canonical_index
from .config import ServiceConfig, make_backend
from .pipeline import (
    PipelineResult,
    StudyStatus,
    TriageClass,
    finding_refs,
    prediction_to_dict,
    result_to_record,
    run_pipeline,
    study_key,
)
from .store import BlobStore, EventLog, SnapshotStore

VERDICTS = ("Accepted", "Rejected")

ALLOWED_TRANSITIONS: dict[StudyStatus, frozenset[StudyStatus]] = {
    StudyStatus.RECEIVED: frozenset({StudyStatus.REJECTED, StudyStatus.CLASSIFIED}),
    StudyStatus.CLASSIFIED: frozenset({StudyStatus.DETECTED}),
    StudyStatus.DETECTED: frozenset({StudyStatus.AWAITING_REVIEW}),
    StudyStatus.AWAITING_REVIEW: frozenset({StudyStatus.REVIEWED}),
    StudyStatus.REVIEWED: frozenset(),
    StudyStatus.REJECTED: frozenset(),
}

_FILTER_KEYS = ("status", "triage", "age_band", "sex", "machine_type", "manufacturer")


class UnknownStudy(KeyError):
    pass


class UnknownFinding(KeyError):
    pass


class StateViolation(RuntimeError):
    """Operation not legal for the study's current status."""


class IllegalTransition(RuntimeError):
    pass


class BadRequest(ValueError):
    pass


@dataclass
class StudyRecord:
    study_id: str
    seq: int
    received_at: float
    status: StudyStatus = StudyStatus.RECEIVED
    reason: str | None = None
    blob: str | None = None
    display_blob: str | None = None
    prediction: dict | None = None
    attributes: dict[str, str] = field(default_factory=dict)
    # finding_ref -> reviewer_id -> verdict (latest per reviewer wins)
    findings: dict[str, dict[str, str]] = field(default_factory=dict)

    @property
    def triage(self) -> str:
        if self.prediction:
            return self.prediction["triage"]
        return TriageClass.ROUTINE.value

    def to_state(self) -> dict:
        return {
            "study_id": self.study_id,
            "seq": self.seq,
            "received_at": self.received_at,
            "status": self.status.value,
            "reason": self.reason,
            "blob": self.blob,
            "display_blob": self.display_blob,
            "prediction": self.prediction,
            "attributes": self.attributes,
            "findings": self.findings,
        }

    @classmethod
    def from_state(cls, state: dict) -> "StudyRecord":
        rec = cls(
            study_id=state["study_id"],
            seq=state["seq"],
            received_at=state["received_at"],
            status=StudyStatus(state["status"]),
            reason=state.get("reason"),
            blob=state.get("blob"),
            display_blob=state.get("display_blob"),
            prediction=state.get("prediction"),
            attributes=state.get("attributes", {}),
        )
        rec.findings = {k: dict(v) for k, v in state.get("findings", {}).items()}
        return rec


class Registry:
    """Event-sourced study registry over a blob store and event log."""

    def __init__(self, store_dir: str | Path, cfg: ServiceConfig):
        self.cfg = cfg
        root = Path(store_dir)
        self.blobs = BlobStore(root / "blobs")
        self.log = EventLog(root / "events.ndjson")
        self.snapshot = SnapshotStore(root / "snapshot.json")
        self.studies: dict[str, StudyRecord] = {}
        self._applied: set[str] = set()
        self._seq = 0
        self._lock = threading.RLock()
        self._backend = None
        self._load()

    # -- persistence ---------------------------------------------------------

    def _load(self) -> None:
        snap = self.snapshot.load()
        if snap:
            self._seq = snap["seq"]
            self._applied = set(snap["applied_event_ids"])
            self.studies = {
                sid: StudyRecord.from_state(state) for sid, state in snap["studies"].items()
            }
        self.log.repair()
        for event in self.log.replay():
            if event["event_id"] not in self._applied:
                self._apply(event)

    def compact(self) -> None:
        """Fold the log into the snapshot and truncate it."""
        with self._lock:
            self.snapshot.save(
                {
                    "seq": self._seq,
                    "applied_event_ids": sorted(self._applied),
                    "studies": {sid: rec.to_state() for sid, rec in self.studies.items()},
                }
            )
            self.log.truncate()

    def close(self) -> None:
        self.log.close()

    # -- event application -----------------------------------------------------

    def _transition(self, rec: StudyRecord, to: StudyStatus) -> None:
        if to not in ALLOWED_TRANSITIONS[rec.status]:
            raise IllegalTransition(f"{rec.study_id}: {rec.status.value} -> {to.value}")
        rec.status = to

    def _apply(self, event: dict) -> None:
        etype = event["type"]
        self._applied.add(event["event_id"])
        if etype == "study_registered":
            sid = event["study_id"]
            if sid in self.studies:
                return
            self._seq += 1
            self.studies[sid] = StudyRecord(
                study_id=sid,
                seq=self._seq,
                received_at=event["received_at"],
                blob=event["blob"],
            )
        elif etype == "study_processed":
            rec = self.studies[event["study_id"]]
            if rec.status is not StudyStatus.RECEIVED:
                return  # a replayed duplicate of work already applied
            rec.attributes = event.get("attributes", {})
            if event["status"] == StudyStatus.REJECTED.value:
                rec.reason = event["reason"]
                self._transition(rec, StudyStatus.REJECTED)
            else:
                rec.prediction = event["prediction"]
                rec.display_blob = event.get("display_blob")
                rec.findings = {ref: {} for ref in event["finding_refs"]}
                self._transition(rec, StudyStatus.CLASSIFIED)
                self._transition(rec, StudyStatus.DETECTED)
                self._transition(rec, StudyStatus.AWAITING_REVIEW)
        elif etype == "feedback":
            rec = self.studies[event["study_id"]]
            rec.findings[event["finding_ref"]][event["reviewer_id"]] = event["verdict"]
            if rec.status is StudyStatus.AWAITING_REVIEW and all(
                verdicts for verdicts in rec.findings.values()
            ):
                self._transition(rec, StudyStatus.REVIEWED)
        else:
            raise IllegalTransition(f"unknown event type {etype!r}")

    def _append_and_apply(self, event: dict) -> None:
        self.log.append(event)  # durable before any state change or ack
        self._apply(event)

    # -- commands ---------------------------------------------------------------

    def submit_bytes(self, data: bytes) -> tuple[str, bool]:
        """Register uploaded bytes; idempotent on content digest."""
        sid = study_key(data)
        with self._lock:
            if sid in self.studies:
                return sid, False
            blob = self.blobs.put(data)
            self._append_and_apply(
                {
                    "type": "study_registered",
                    "event_id": f"reg-{sid}",
                    "study_id": sid,
                    "blob": blob,
                    "received_at": time.time(),
                }
            )
            return sid, True

    def backend(self):
        if self._backend is None:
            self._backend = make_backend(self.cfg)
        return self._backend

    def process_study(self, study_id: str) -> StudyRecord:
        """Run the pipeline for a registered study and record the outcome."""
        with self._lock:
            rec = self._get(study_id)
            if rec.status is not StudyStatus.RECEIVED:
                return rec
            data = self.blobs.get(rec.blob)
        result = run_pipeline(data, self.backend(), self.cfg)
        with self._lock:
            rec = self._get(study_id)
            if rec.status is not StudyStatus.RECEIVED:
                return rec
            self._append_and_apply(self._processed_event(result))
            return rec

    def _processed_event(self, result: PipelineResult) -> dict:
        event = {
            "type": "study_processed",
            "event_id": f"proc-{result.study_id}",
            "study_id": result.study_id,
            "status": result.status.value,
        }
        if result.meta is not None:
            event["attributes"] = result_to_record(result).get("attributes", {})
        if result.status is StudyStatus.REJECTED:
            event["reason"] = result.reason
        else:
            event["prediction"] = prediction_to_dict(result.prediction)
            event["finding_refs"] = finding_refs(result.prediction)
            if result.display_image is not None:
                event["display_blob"] = self.blobs.put(write_pgm(result.display_image))
        return event

    def feedback(
        self,
        study_id: str,
        finding_ref: str,
        verdict: str,
        reviewer_id: str,
        event_id: str | None = None,
    ) -> tuple[str, bool]:
        """Record one reviewer verdict; returns (event_id, newly_applied)."""
        if verdict not in VERDICTS:
            raise BadRequest(f"verdict {verdict!r} not in {VERDICTS}")
        if not reviewer_id:
            raise BadRequest("reviewer_id required")
        event_id = event_id or f"fb-{uuid.uuid4().hex}"
        with self._lock:
            rec = self._get(study_id)
            if event_id in self._applied:
                return event_id, False
            if rec.status not in (StudyStatus.AWAITING_REVIEW, StudyStatus.REVIEWED):
                raise StateViolation(f"study is {rec.status.value}")
            if finding_ref not in rec.findings:
                raise UnknownFinding(finding_ref)
            self._append_and_apply(
                {
                    "type": "feedback",
                    "event_id": event_id,
                    "study_id": study_id,
                    "finding_ref": finding_ref,
                    "verdict": verdict,
                    "reviewer_id": reviewer_id,
                }
            )
            return event_id, True

    # -- queries -----------------------------------------------------------------

    def _get(self, study_id: str) -> StudyRecord:
        try:
            return self.studies[study_id]
        except KeyError:
            raise UnknownStudy(study_id) from None

    def get_study(self, study_id: str) -> StudyRecord:
        with self._lock:
            return self._get(study_id)

    def status_counts(self) -> dict[str, int]:
        with self._lock:
            counts: dict[str, int] = {}
            for rec in self.studies.values():
                counts[rec.status.value] = counts.get(rec.status.value, 0) + 1
            return counts

    def pending_studies(self) -> list[str]:
        with self._lock:
            return [
                rec.study_id
                for rec in sorted(self.studies.values(), key=lambda r: r.seq)
                if rec.status is StudyStatus.RECEIVED
            ]

    def worklist(self, filters: dict[str, str] | None = None) -> list[dict]:
        """Rows ordered Critical first, then arrival order."""
        filters = filters or {}
        for key in filters:
            if key not in _FILTER_KEYS:
                raise BadRequest(f"unknown filter {key!r}; allowed: {_FILTER_KEYS}")
        with self._lock:
            rows = []
            for rec in self.studies.values():
                row = {
                    "study_id": rec.study_id,
                    "status": rec.status.value,
                    "triage": rec.triage,
                    "received_at": rec.received_at,
                    "seq": rec.seq,
                    "reason": rec.reason,
                    **{k: rec.attributes.get(k, "Unknown") for k in
                       ("age_band", "sex", "machine_type", "manufacturer")},
                }
                if all(row.get(k) == v for k, v in filters.items()):
                    rows.append(row)
            rows.sort(key=lambda r: (0 if r["triage"] == TriageClass.CRITICAL.value else 1, r["seq"]))
            return rows

    # -- live metrics ---------------------------------------------------------------

    def _reviewed_observations(self) -> list[tuple[StudyRecord, bool, bool, float]]:
        """(record, predicted_abnormal, implied_reference_abnormal, score) per reviewed study.

        The implied reference flips the prediction when the majority of
        classification verdicts rejected it (Accepted = agreement).
        """
        obs = []
        for rec in self.studies.values():
            if rec.status is not StudyStatus.REVIEWED or not rec.prediction:
                continue
            verdicts = rec.findings.get("classification", {})
            if not verdicts:
                continue
            accepted = sum(1 for v in verdicts.values() if v == "Accepted")
            agreed = accepted >= (len(verdicts) - accepted)
            predicted = rec.prediction["decision"] == Decision.ABNORMAL.value
            reference = predicted if agreed else not predicted
            obs.append((rec, predicted, reference, float(rec.prediction["ensemble"][1])))
        return obs

    def live_report(self) -> MetricReport:
        """Agreement metrics from accumulated radiologist feedback."""
        with self._lock:
            report = MetricReport()
            obs = self._reviewed_observations()
            if obs:
                counts = confusion((p, r) for _, p, r, _ in obs)
                metrics = agreement_metrics(counts)
                for name in ("ppv", "npv", "ppa", "npa"):
                    value = getattr(metrics, name)
                    if value is None:
                        continue
                    num, den = metric_counts(counts, name)
                    lo, hi = confidence_interval(num, den)
                    report.classification[name] = ClassificationEntry(value, lo, hi)
            else:
                report.notices.append("no reviewed studies yet")

            tallies: dict[str, list[int]] = {}
            for rec in self.studies.values():
                if not rec.prediction:
                    continue
                labels = {
                    f"det-{i}": d["label"] for i, d in enumerate(rec.prediction["detections"])
                }
                for ref, verdicts in rec.findings.items():
                    if ref not in labels or not verdicts:
                        continue
                    t = tallies.setdefault(labels[ref], [0, 0])
                    for verdict in verdicts.values():
                        t[0] += 1 if verdict == "Accepted" else 0
                        t[1] += 1
            for label in sorted(tallies, key=canonical_index):
                accepted, total = tallies[label]
                report.pathology_rows.append(
                    PathologyRow(
                        label=label,
                        auc=None,
                        precision_pct=100.0 * accepted / total,
                        recall_pct=None,
                    )
                )
            return report

    def subgroup_report(self, by: str) -> MetricReport:
        """Live agreement metrics stratified along one attribute dimension."""
        if by not in DIMENSIONS:
            raise UnknownDimension(by)
        attr, domain = DIMENSIONS[by]
        with self._lock:
            groups: dict[str, list[tuple[bool, bool, float]]] = {}
            for rec, p, r, s in self._reviewed_observations():
                groups.setdefault(rec.attributes.get(attr, "Unknown"), []).append((p, r, s))

            report = MetricReport()
            rows: list[SubgroupRow] = []
            order = list(domain) + [g for g in sorted(groups) if g not in domain]
            for group in order:
                members = groups.get(group, [])
                if not members:
                    report.notices.append(f"subgroup {by}={group} omitted (no records)")
                    continue
                counts = confusion((p, r) for p, r, _ in members)
                try:
                    g_auc = auc([s for _, _, s in members], [1 if r else 0 for _, r, _ in members])
                except SingleClass:
                    g_auc = None
                total = counts.total
                den_p = counts.tp + counts.fp
                den_r = counts.tp + counts.fn
                den_s = counts.tn + counts.fp
                rows.append(
                    SubgroupRow(
                        group=group,
                        n=len(members),
                        auc=g_auc,
                        accuracy_pct=100.0 * (counts.tp + counts.tn) / total if total else None,
                        precision_pct=100.0 * counts.tp / den_p if den_p else None,
                        recall_pct=100.0 * counts.tp / den_r if den_r else None,
                        sensitivity_pct=100.0 * counts.tp / den_r if den_r else None,
                        specificity_pct=100.0 * counts.tn / den_s if den_s else None,
                    )
                )
            report.subgroups[by] = rows
            return report
