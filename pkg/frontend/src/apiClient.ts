// Typed client for the triage service JSON API.
//
// All server access goes through this module; the UI never reads any other
// source. The fetch implementation is injectable so tests can stand in for
// the network, and every request carries a timeout so a stalled connection
// surfaces as TimeoutError rather than hanging the review.

import type {
  FeedbackAck,
  HealthSnapshot,
  PredictionResponse,
  StudyView,
  Verdict,
  WorklistRow,
} from "./types.js";

export const REVIEWER_HEADER = "X-Reviewer-Id";

/** Query keys GET /worklist accepts; anything else is answered with 400. */
export interface WorklistFilters {
  status?: string;
  triage?: string;
  age_band?: string;
  sex?: string;
  machine_type?: string;
  manufacturer?: string;
}

export interface FeedbackBody {
  finding_ref: string;
  verdict: Verdict;
  event_id: string;
}

/** A non-2xx answer from the service, carrying its status and detail text. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
    readonly path: string,
  ) {
    super(`${status} on ${path}: ${detail}`);
    this.name = "ApiError";
  }
}

/** The request was abandoned after `timeoutMs` without an answer. */
export class TimeoutError extends Error {
  constructor(
    readonly path: string,
    readonly timeoutMs: number,
  ) {
    super(`request to ${path} timed out after ${timeoutMs} ms`);
    this.name = "TimeoutError";
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export interface TriageClientOptions {
  baseUrl: string;
  /** Sent as the X-Reviewer-Id header; required for feedback calls. */
  reviewerId?: string;
  fetchFn?: FetchLike;
  timeoutMs?: number;
}

function isAbort(err: unknown): boolean {
  return err instanceof Error && err.name === "AbortError";
}

export class TriageClient {
  readonly baseUrl: string;
  readonly reviewerId: string | undefined;
  readonly timeoutMs: number;
  private readonly fetchFn: FetchLike;

  constructor(opts: TriageClientOptions) {
    this.baseUrl = opts.baseUrl.replace(/\/+$/, "");
    this.reviewerId = opts.reviewerId;
    this.timeoutMs = opts.timeoutMs ?? 10_000;
    this.fetchFn = opts.fetchFn ?? ((input, init) => fetch(input, init));
  }

  async worklist(filters: WorklistFilters = {}): Promise<WorklistRow[]> {
    const params = new URLSearchParams();
    for (const [key, value] of Object.entries(filters)) {
      if (value !== undefined) {
        params.set(key, value);
      }
    }
    const query = params.toString();
    const body = await this.request<{ studies: WorklistRow[] }>(
      query ? `/worklist?${query}` : "/worklist",
    );
    return body.studies;
  }

  study(studyId: string): Promise<StudyView> {
    return this.request(`/studies/${studyId}`);
  }

  predictions(studyId: string): Promise<PredictionResponse> {
    return this.request(`/studies/${studyId}/predictions`);
  }

  submitFeedback(studyId: string, feedback: FeedbackBody): Promise<FeedbackAck> {
    if (!this.reviewerId) {
      throw new Error("reviewerId is required to submit feedback");
    }
    return this.request(`/predictions/${studyId}/feedback`, {
      method: "POST",
      headers: {
        "Content-Type": "application/json",
        [REVIEWER_HEADER]: this.reviewerId,
      },
      body: JSON.stringify(feedback),
    });
  }

  health(): Promise<HealthSnapshot> {
    return this.request("/healthz");
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const controller = new AbortController();
    const timer = setTimeout(() => controller.abort(), this.timeoutMs);
    let response: Response;
    try {
      response = await this.fetchFn(this.baseUrl + path, {
        ...init,
        signal: controller.signal,
      });
    } catch (err) {
      if (isAbort(err)) {
        throw new TimeoutError(path, this.timeoutMs);
      }
      throw err;
    } finally {
      clearTimeout(timer);
    }
    if (!response.ok) {
      throw new ApiError(response.status, await detailOf(response), path);
    }
    return (await response.json()) as T;
  }
}

async function detailOf(response: Response): Promise<string> {
  try {
    const body: unknown = await response.clone().json();
    if (body && typeof body === "object" && "detail" in body) {
      return String((body as { detail: unknown }).detail);
    }
  } catch {
    // fall through to raw text
  }
  try {
    return await response.text();
  } catch {
    return response.statusText;
  }
}
