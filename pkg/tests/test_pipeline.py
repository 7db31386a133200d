import pytest

from cxr_triage.backends import (
    Decision,
    ProbabilityVector,
    SanityVerdict,
)
from cxr_triage.detection import BBox, Detection
from cxr_triage.ingest.metadata import ViewHint
from cxr_triage.service import (
    MaskRecord,
    PredictionSet,
    StudyStatus,
    TriageClass,
    dump_record,
    finding_refs,
    make_backend,
    result_to_record,
    run_pipeline,
    study_key,
    triage_class,
)

from conftest import study_blob


def run_corpus_study(corpus, name):
    backend = make_backend(corpus.config)
    return run_pipeline(corpus.by_name(name).blob, backend, corpus.config)


class TestCorpusOutcomes:
    def test_every_study_reaches_its_expected_outcome(self, corpus):
        backend = make_backend(corpus.config)
        for study in corpus.studies:
            result = run_pipeline(study.blob, backend, corpus.config)
            assert result.status.value == study.expect_status, study.name
            assert result.reason == study.expect_reason, study.name
            if study.expect_decision is None:
                assert result.prediction is None, study.name
            else:
                assert result.prediction.decision.value == study.expect_decision, study.name
                assert result.prediction.triage.value == study.expect_triage, study.name

    def test_rejected_studies_carry_no_artifacts(self, corpus):
        backend = make_backend(corpus.config)
        for study in corpus.studies:
            if study.expect_status != "Rejected":
                continue
            result = run_pipeline(study.blob, backend, corpus.config)
            assert result.prediction is None
            assert result.display_image is None
            rec = result_to_record(result)
            assert "decision" not in rec
            assert "detections" not in rec
            assert "masks" not in rec

    def test_parse_rejects_have_no_attributes_model_rejects_do(self, corpus):
        backend = make_backend(corpus.config)
        magic = run_pipeline(corpus.by_name("reject-magic").blob, backend, corpus.config)
        assert magic.meta is None
        assert "attributes" not in result_to_record(magic)
        not_xray = run_pipeline(corpus.by_name("reject-not-xray").blob, backend, corpus.config)
        assert not_xray.meta is not None
        assert "attributes" in result_to_record(not_xray)

    def test_unknown_content_is_a_backend_rejection(self, corpus):
        backend = make_backend(corpus.config)
        result = run_pipeline(study_blob(seed=9999), backend, corpus.config)
        assert result.status is StudyStatus.REJECTED
        assert result.reason == "backend_unavailable"

    def test_metadata_is_anonymized(self, corpus):
        result = run_corpus_study(corpus, "normal-0")
        assert result.meta.anonymized
        assert result.meta.identifiers == {}
        assert result.meta.study_id.startswith("anon-")


class TestDeterminism:
    def test_records_are_byte_identical_across_runs(self, corpus):
        for study in corpus.studies:
            first = dump_record(
                result_to_record(run_pipeline(study.blob, make_backend(corpus.config), corpus.config))
            )
            second = dump_record(
                result_to_record(run_pipeline(study.blob, make_backend(corpus.config), corpus.config))
            )
            assert first == second, study.name


class TestAbnormalPath:
    def test_masks_align_with_detections(self, corpus):
        result = run_corpus_study(corpus, "abnormal-critical-1")
        pred = result.prediction
        assert len(pred.masks) == len(pred.detections) >= 1
        for i, (det, mask) in enumerate(zip(pred.detections, pred.masks)):
            assert mask.finding_id == f"det-{i}"
            assert mask.label == det.label
            assert sum(mask.rle) == mask.width * mask.height

    def test_overlapping_duplicates_are_suppressed(self, corpus):
        # Two near-identical Cardiomegaly boxes were authored; one survives.
        result = run_corpus_study(corpus, "abnormal-routine-1")
        labels = [d.label for d in result.prediction.detections]
        assert labels.count("Cardiomegaly") == 1

    def test_low_scoring_detections_are_dropped(self, corpus):
        # Fibrosis at 0.71 and a disjoint Fibrosis at 0.31: only the first
        # clears the 0.5 reporting threshold.
        result = run_corpus_study(corpus, "abnormal-routine-3")
        dets = result.prediction.detections
        assert [d.label for d in dets] == ["Fibrosis"]
        assert dets[0].score == 0.71

    def test_critical_label_escalates_triage(self, corpus):
        result = run_corpus_study(corpus, "abnormal-critical-0")
        assert result.prediction.triage is TriageClass.CRITICAL

    def test_normal_studies_have_no_findings(self, corpus):
        result = run_corpus_study(corpus, "normal-2")
        assert result.prediction.decision is Decision.NORMAL
        assert result.prediction.detections == ()
        assert result.prediction.masks == ()

    def test_review_refs_enumerate_findings(self, corpus):
        abnormal = run_corpus_study(corpus, "abnormal-critical-1").prediction
        assert finding_refs(abnormal) == ["classification"] + [
            f"det-{i}" for i in range(len(abnormal.detections))
        ]
        normal = run_corpus_study(corpus, "normal-0").prediction
        assert finding_refs(normal) == ["classification"]


class TestAlignment:
    def test_tilted_study_is_rotation_corrected(self, corpus):
        result = run_corpus_study(corpus, "abnormal-tilted-0")
        assert result.prediction.rotation_applied == pytest.approx(5.0, abs=1e-6)
        result = run_corpus_study(corpus, "abnormal-tilted-1")
        assert result.prediction.rotation_applied == pytest.approx(-8.0, abs=1e-6)

    def test_missing_landmarks_mean_no_rotation(self, corpus):
        result = run_corpus_study(corpus, "no-landmarks")
        assert result.status is StudyStatus.AWAITING_REVIEW
        assert result.prediction.rotation_applied == 0.0


def sanity() -> SanityVerdict:
    return SanityVerdict(True, 0.9, True, 0.9, ViewHint.PA, 0.8)


class TestPredictionSetInvariants:
    def test_normal_with_findings_rejected(self):
        with pytest.raises(ValueError):
            PredictionSet(
                study_id="s",
                sanity=sanity(),
                rotation_applied=0.0,
                ensemble=ProbabilityVector((0.8, 0.2)),
                decision=Decision.NORMAL,
                detections=(Detection(BBox(0, 0, 5, 5), "Nodule", 0.9),),
                masks=(),
                triage=TriageClass.ROUTINE,
            )

    def test_mask_without_detection_rejected(self):
        with pytest.raises(ValueError):
            PredictionSet(
                study_id="s",
                sanity=sanity(),
                rotation_applied=0.0,
                ensemble=ProbabilityVector((0.2, 0.8)),
                decision=Decision.ABNORMAL,
                detections=(Detection(BBox(0, 0, 5, 5), "Nodule", 0.9),),
                masks=(MaskRecord("det-0", "Fibrosis", 0, 0, 2, 2, (4,)),),
                triage=TriageClass.ROUTINE,
            )


class TestHelpers:
    def test_study_key_shape_and_content_addressing(self):
        a = study_key(b"one")
        b = study_key(b"two")
        assert a.startswith("st-") and len(a) == 35
        assert a != b
        assert study_key(b"one") == a

    def test_triage_class(self):
        crit = frozenset({"Pneumothorax"})
        assert triage_class((Detection(BBox(0, 0, 5, 5), "Pneumothorax", 0.9),), crit) is TriageClass.CRITICAL
        assert triage_class((Detection(BBox(0, 0, 5, 5), "Nodule", 0.9),), crit) is TriageClass.ROUTINE
        assert triage_class((), crit) is TriageClass.ROUTINE
