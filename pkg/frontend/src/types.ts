// Payload shapes exchanged with the triage service over its JSON API.
// Field names mirror the wire format exactly.

export type StudyStatus =
  | "Received"
  | "Rejected"
  | "Classified"
  | "Detected"
  | "AwaitingReview"
  | "Reviewed";

export type TriageClass = "Critical" | "Routine";

export type Decision = "Normal" | "Abnormal";

export type Verdict = "Accepted" | "Rejected";

/** One row of GET /worklist. The server orders Critical studies first, then arrival order. */
export interface WorklistRow {
  study_id: string;
  status: StudyStatus;
  triage: TriageClass | null;
  received_at: number;
  seq: number;
  reason: string | null;
  age_band: string | null;
  sex: string | null;
  machine_type: string | null;
  manufacturer: string | null;
}

export interface StudyAttributes {
  age_band: string | null;
  sex: string | null;
  machine_type: string | null;
  manufacturer: string | null;
}

/** GET /studies/{id}. */
export interface StudyView {
  study_id: string;
  status: StudyStatus;
  reason: string | null;
  triage: TriageClass | null;
  received_at: number;
  attributes: StudyAttributes;
}

export interface SanityReport {
  is_xray: boolean;
  xray_score: number;
  is_chest: boolean;
  chest_score: number;
  view: string;
  view_score: number;
}

/** A detection box in image pixel coordinates. */
export interface Detection {
  label: string;
  score: number;
  x1: number;
  y1: number;
  x2: number;
  y2: number;
}

/**
 * A binary mask anchored at (x, y) in image pixels, encoded row-major as
 * alternating run lengths starting with the background run; runs sum to
 * width * height. `finding_id` matches the detection's finding ref ("det-i").
 */
export interface MaskRecord {
  finding_id: string;
  label: string;
  x: number;
  y: number;
  width: number;
  height: number;
  rle: number[];
}

export interface Prediction {
  study_id: string;
  sanity: SanityReport;
  rotation_applied: number;
  ensemble: [number, number];
  decision: Decision;
  triage: TriageClass;
  detections: Detection[];
  masks: MaskRecord[];
}

/** Reviewer verdicts recorded so far for one finding, keyed by reviewer id. */
export interface FindingEntry {
  finding_ref: string;
  verdicts: Record<string, Verdict>;
}

/** GET /studies/{id}/predictions; the server answers 409 while no prediction exists. */
export interface PredictionResponse {
  study_id: string;
  status: StudyStatus;
  prediction: Prediction;
  findings: FindingEntry[];
}

/** POST /predictions/{id}/feedback acknowledgement. */
export interface FeedbackAck {
  event_id: string;
  applied: boolean;
  study_status: StudyStatus;
}

export interface HealthSnapshot {
  studies: number;
  pending: number;
  by_status: Record<string, number>;
}
