import { describe, expect, it } from "vitest";

import { ApiError, TriageClient } from "../src/apiClient.js";
import type { WorklistRow } from "../src/types.js";
import { WorklistView, triageBadge } from "../src/worklist.js";
import { FakeService } from "./fakeService.js";

function client(svc: FakeService): TriageClient {
  return new TriageClient({ baseUrl: "http://svc", reviewerId: "dr-blue", fetchFn: svc.fetch });
}

function seeded(): FakeService {
  const svc = new FakeService();
  svc.addStudy({ studyId: "st-routine", triage: "Routine", detections: [] });
  svc.addStudy({
    studyId: "st-critical",
    triage: "Critical",
    detections: [{ label: "Pneumothorax", score: 0.9, x1: 1, y1: 2, x2: 30, y2: 40 }],
  });
  svc.addStudy({ studyId: "st-normal", decision: "Normal", triage: "Routine", detections: [] });
  return svc;
}

describe("WorklistView", () => {
  it("stores rows in the exact order the server sent, critical first", async () => {
    const view = new WorklistView();
    await view.refresh(client(seeded()));
    expect(view.rows.map((r) => r.study_id)).toEqual(["st-critical", "st-routine", "st-normal"]);
    expect(view.state.kind).toBe("ready");
  });

  it("never reorders rows client-side, whatever order arrives", async () => {
    // a hand-built payload in deliberately scrambled order
    const scrambled: Partial<WorklistRow>[] = [
      { study_id: "b", status: "AwaitingReview", triage: "Routine", seq: 2 },
      { study_id: "c", status: "Reviewed", triage: "Critical", seq: 3 },
      { study_id: "a", status: "AwaitingReview", triage: "Critical", seq: 1 },
    ];
    const fetchFn = async () =>
      new Response(JSON.stringify({ studies: scrambled }), {
        status: 200,
        headers: { "Content-Type": "application/json" },
      });
    const view = new WorklistView();
    await view.refresh(new TriageClient({ baseUrl: "http://svc", fetchFn }));
    expect(view.rows.map((r) => r.study_id)).toEqual(["b", "c", "a"]);
    expect(view.rowViews().map((r) => r.studyId)).toEqual(["b", "c", "a"]);
  });

  it("forwards filters verbatim and drops cleared ones", async () => {
    const svc = seeded();
    const view = new WorklistView();
    view.setFilter("status", "AwaitingReview");
    view.setFilter("sex", "Male");
    await view.refresh(client(svc));
    expect(svc.requests.at(-1)?.path).toBe("/worklist?status=AwaitingReview&sex=Male");
    view.setFilter("sex", undefined);
    await view.refresh(client(svc));
    expect(svc.requests.at(-1)?.path).toBe("/worklist?status=AwaitingReview");
    view.clearFilters();
    await view.refresh(client(svc));
    expect(svc.requests.at(-1)?.path).toBe("/worklist");
  });

  it("surfaces a server-refused filter as an error state", async () => {
    const svc = seeded();
    const view = new WorklistView();
    view.filters = { status: "AwaitingReview", zodiac: "Leo" } as typeof view.filters;
    await expect(view.refresh(client(svc))).rejects.toThrow(ApiError);
    expect(view.state).toMatchObject({ kind: "error" });
  });

  it("shows decisions only once a study's predictions were opened", async () => {
    const view = new WorklistView();
    await view.refresh(client(seeded()));
    expect(view.rowViews().map((r) => r.decision)).toEqual([null, null, null]);
    view.noteDecision("st-critical", "Abnormal");
    const rows = view.rowViews();
    expect(rows[0]).toMatchObject({ studyId: "st-critical", decision: "Abnormal" });
    expect(rows[1]?.decision).toBeNull();
  });

  it("badges triage classes for display", () => {
    expect(triageBadge("Critical")).toEqual({ label: "Critical", tone: "critical" });
    expect(triageBadge("Routine")).toEqual({ label: "Routine", tone: "routine" });
    expect(triageBadge(null)).toEqual({ label: "-", tone: "none" });
  });
});
