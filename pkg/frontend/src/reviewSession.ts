// One reviewer's pass over a study's findings.
//
// Cards are optimistic client state until the server acknowledges them;
// loading a study rebuilds every card from the verdicts the server has
// recorded, so the client never owns review state and a reload lands exactly
// where the server says the review stands.
//
// Idempotency: a card gets a fresh event id whenever it is (re)marked, and
// that id is reused for every retry of that marked verdict, so a POST that
// times out can be retried without ever double-recording. Changing the
// verdict regenerates the id, so a correction is never swallowed as a
// duplicate of the old event.

import { ApiError, TimeoutError } from "./apiClient.js";
import type { TriageClient } from "./apiClient.js";
import type {
  Prediction,
  PredictionResponse,
  StudyStatus,
  Verdict,
} from "./types.js";
import type { Box } from "./viewport.js";

export type CardState =
  | { kind: "pending" }
  | { kind: "marked"; verdict: Verdict }
  | { kind: "submitting"; verdict: Verdict }
  | { kind: "confirmed"; verdict: Verdict }
  | { kind: "failed"; verdict: Verdict; status: number; detail: string };

/** One reviewable finding: the study-level classification or one detection. */
export interface FindingCard {
  ref: string;
  label: string;
  score: number;
  /** Detection box in image pixels; null for the whole-image classification. */
  box: Box | null;
  hasMask: boolean;
  state: CardState;
  /** Stable across retries of the current marked verdict; null while pending. */
  eventId: string | null;
  /** Verdicts the server already holds for this finding, keyed by reviewer. */
  serverVerdicts: Record<string, Verdict>;
}

export type SubmitOutcome =
  | { kind: "confirmed"; ref: string; alreadyRecorded: boolean }
  | { kind: "refused"; ref: string; status: number; detail: string }
  | { kind: "unreachable"; ref: string; attempts: number };

export interface SubmitReport {
  /** Latest status the server reported while acknowledging; null if nothing landed. */
  studyStatus: StudyStatus | null;
  outcomes: SubmitOutcome[];
}

export interface ReviewSessionOptions {
  /** Extra attempts after a timed-out POST (default 2). */
  retries?: number;
  /** Event id factory, injectable for tests. */
  makeEventId?: () => string;
}

function defaultEventId(): string {
  return `ui-${crypto.randomUUID()}`;
}

export class ReviewSession {
  readonly studyId: string;
  readonly reviewerId: string;
  readonly prediction: Prediction;
  readonly cards: FindingCard[];
  studyStatus: StudyStatus;
  selected = 0;
  private readonly retries: number;
  private readonly makeEventId: () => string;

  static async load(
    client: TriageClient,
    studyId: string,
    opts: ReviewSessionOptions = {},
  ): Promise<ReviewSession> {
    if (!client.reviewerId) {
      throw new Error("reviewerId is required to review a study");
    }
    const response = await client.predictions(studyId);
    return new ReviewSession(client.reviewerId, response, opts);
  }

  constructor(reviewerId: string, response: PredictionResponse, opts: ReviewSessionOptions = {}) {
    this.studyId = response.study_id;
    this.reviewerId = reviewerId;
    this.prediction = response.prediction;
    this.studyStatus = response.status;
    this.retries = opts.retries ?? 2;
    this.makeEventId = opts.makeEventId ?? defaultEventId;
    this.cards = response.findings.map((entry) => this.buildCard(entry.finding_ref, entry.verdicts));
  }

  private buildCard(ref: string, serverVerdicts: Record<string, Verdict>): FindingCard {
    const pred = this.prediction;
    let label: string = pred.decision;
    let score = pred.ensemble[1];
    let box: Box | null = null;
    const match = /^det-(\d+)$/.exec(ref);
    if (match) {
      const det = pred.detections[Number(match[1])];
      if (det) {
        label = det.label;
        score = det.score;
        box = { x1: det.x1, y1: det.y1, x2: det.x2, y2: det.y2 };
      }
    }
    const mine = serverVerdicts[this.reviewerId];
    return {
      ref,
      label,
      score,
      box,
      hasMask: pred.masks.some((m) => m.finding_id === ref),
      state: mine ? { kind: "confirmed", verdict: mine } : { kind: "pending" },
      eventId: null,
      serverVerdicts,
    };
  }

  card(ref: string): FindingCard {
    const found = this.cards.find((c) => c.ref === ref);
    if (!found) {
      throw new Error(`no finding ${ref} in study ${this.studyId}`);
    }
    return found;
  }

  get selectedCard(): FindingCard | null {
    return this.cards[this.selected] ?? null;
  }

  selectNext(): void {
    this.selected = Math.min(this.selected + 1, this.cards.length - 1);
  }

  selectPrev(): void {
    this.selected = Math.max(this.selected - 1, 0);
  }

  /**
   * Mark a verdict. Allowed from pending, marked, and failed; a confirmed or
   * in-flight card is immutable. Returns whether the mark was applied.
   */
  mark(ref: string, verdict: Verdict): boolean {
    const card = this.card(ref);
    switch (card.state.kind) {
      case "pending":
      case "marked":
      case "failed":
        card.state = { kind: "marked", verdict };
        card.eventId = this.makeEventId();
        return true;
      case "submitting":
      case "confirmed":
        return false;
    }
  }

  accept(ref: string): boolean {
    return this.mark(ref, "Accepted");
  }

  reject(ref: string): boolean {
    return this.mark(ref, "Rejected");
  }

  /** Take back a mark before it is submitted. Confirmed verdicts stay. */
  undo(ref: string): boolean {
    const card = this.card(ref);
    switch (card.state.kind) {
      case "marked":
      case "failed":
        card.state = { kind: "pending" };
        card.eventId = null;
        return true;
      case "pending":
      case "submitting":
      case "confirmed":
        return false;
    }
  }

  get hasPending(): boolean {
    return this.cards.some((c) => c.state.kind === "pending");
  }

  /** Submit is enabled once every card carries a verdict and some are unsent. */
  get canSubmit(): boolean {
    if (this.cards.length === 0 || this.hasPending) {
      return false;
    }
    if (this.cards.some((c) => c.state.kind === "submitting")) {
      return false;
    }
    return this.cards.some((c) => c.state.kind === "marked" || c.state.kind === "failed");
  }

  get reviewed(): boolean {
    return this.studyStatus === "Reviewed";
  }

  /**
   * POST one feedback event per unsent card. A timeout retries with the same
   * event id; a refusal (409/404/400) is recorded on that card and the rest
   * still go through.
   */
  async submit(client: TriageClient): Promise<SubmitReport> {
    if (this.hasPending) {
      throw new Error("every finding needs a verdict before submitting");
    }
    const outcomes: SubmitOutcome[] = [];
    let studyStatus: StudyStatus | null = null;
    for (const card of this.cards) {
      if (card.state.kind !== "marked" && card.state.kind !== "failed") {
        continue;
      }
      const verdict = card.state.verdict;
      const eventId = card.eventId ?? this.makeEventId();
      card.eventId = eventId;
      card.state = { kind: "submitting", verdict };
      const outcome = await this.postVerdict(client, card.ref, verdict, eventId);
      outcomes.push(outcome);
      switch (outcome.kind) {
        case "confirmed":
          card.state = { kind: "confirmed", verdict };
          card.serverVerdicts[this.reviewerId] = verdict;
          break;
        case "refused":
          card.state = { kind: "failed", verdict, status: outcome.status, detail: outcome.detail };
          break;
        case "unreachable":
          // Back to marked with the event id kept, so the next submit retries
          // the identical event.
          card.state = { kind: "marked", verdict };
          break;
      }
      if (outcome.kind === "confirmed") {
        studyStatus = this.studyStatus;
      }
    }
    return { studyStatus, outcomes };
  }

  private async postVerdict(
    client: TriageClient,
    ref: string,
    verdict: Verdict,
    eventId: string,
  ): Promise<SubmitOutcome> {
    let attempts = 0;
    for (;;) {
      attempts += 1;
      try {
        const ack = await client.submitFeedback(this.studyId, {
          finding_ref: ref,
          verdict,
          event_id: eventId,
        });
        this.studyStatus = ack.study_status;
        return { kind: "confirmed", ref, alreadyRecorded: !ack.applied };
      } catch (err) {
        if (err instanceof TimeoutError) {
          if (attempts <= this.retries) {
            continue;
          }
          return { kind: "unreachable", ref, attempts };
        }
        if (err instanceof ApiError) {
          return { kind: "refused", ref, status: err.status, detail: err.detail };
        }
        throw err;
      }
    }
  }
}
