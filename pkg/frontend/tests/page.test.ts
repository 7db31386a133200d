// @vitest-environment happy-dom

import { beforeEach, describe, expect, it } from "vitest";

import { TriageClient } from "../src/apiClient.js";
import { ReviewDeskPage } from "../src/page.js";
import { FakeService } from "./fakeService.js";

const CRITICAL = "st-critical";

function seeded(): FakeService {
  const svc = new FakeService();
  svc.addStudy({ studyId: "st-routine", triage: "Routine", detections: [] });
  svc.addStudy({
    studyId: CRITICAL,
    triage: "Critical",
    detections: [
      { label: "Pneumoperitoneum", score: 0.91, x1: 40, y1: 36, x2: 120, y2: 110 },
      { label: "Atelectasis", score: 0.77, x1: 200, y1: 140, x2: 260, y2: 220 },
    ],
    masks: [
      {
        finding_id: "det-0",
        label: "Pneumoperitoneum",
        x: 40,
        y: 36,
        width: 2,
        height: 2,
        rle: [0, 2, 1, 1],
      },
    ],
  });
  return svc;
}

function mount(svc: FakeService): ReviewDeskPage {
  document.body.innerHTML = '<div id="app"></div>';
  const client = new TriageClient({
    baseUrl: "http://svc",
    reviewerId: "dr-blue",
    fetchFn: svc.fetch,
  });
  return new ReviewDeskPage(document.getElementById("app")!, client);
}

function press(key: string): void {
  document.dispatchEvent(new KeyboardEvent("keydown", { key, bubbles: true }));
}

function rowTexts(): string[][] {
  return [...document.querySelectorAll(".worklist-row")].map((tr) =>
    [...tr.children].map((td) => td.textContent ?? ""),
  );
}

describe("ReviewDeskPage", () => {
  beforeEach(() => {
    document.body.innerHTML = "";
  });

  it("renders the worklist in server order with triage badges", async () => {
    const page = mount(seeded());
    await page.start();
    const rows = rowTexts();
    expect(rows).toHaveLength(2);
    expect(rows[0]?.[2]).toBe("Critical");
    expect(rows[1]?.[2]).toBe("Routine");
    page.destroy();
  });

  it("drives a full keyboard review to a Reviewed worklist row", async () => {
    const svc = seeded();
    const page = mount(svc);
    await page.start();
    await page.openStudy(CRITICAL);

    const cards = document.querySelectorAll(".card");
    expect(cards).toHaveLength(3);
    const submit = document.querySelector(".submit") as HTMLButtonElement;
    expect(submit.disabled).toBe(true);

    press("a"); // accept classification
    expect(document.querySelector(".card .card-state")?.textContent).toBe("Accepted (unsent)");
    expect((document.querySelector(".submit") as HTMLButtonElement).disabled).toBe(true);

    press("j");
    press("a"); // accept det-0
    press("j");
    press("x"); // reject det-1
    expect(page.session?.canSubmit).toBe(true);
    expect((document.querySelector(".submit") as HTMLButtonElement).disabled).toBe(false);

    await page.submitVerdicts();
    expect(svc.study(CRITICAL).status).toBe("Reviewed");
    expect(document.querySelector(".notice")?.textContent).toContain("study Reviewed");
    const critical = rowTexts().find((cells) => cells[1] === "Reviewed");
    expect(critical).toBeDefined();
    page.destroy();
  });

  it("keeps an overlay plan with placeholder backdrop, boxes, and toggleable masks", async () => {
    const page = mount(seeded());
    await page.start();
    await page.openStudy(CRITICAL);

    const kinds = page.lastPlan?.ops.map((op) => op.kind);
    expect(kinds?.[0]).toBe("placeholder");
    expect(kinds?.filter((k) => k === "box")).toHaveLength(2);
    expect(kinds?.filter((k) => k === "mask")).toHaveLength(1);

    press("m"); // global mask toggle
    expect(page.lastPlan?.ops.some((op) => op.kind === "mask")).toBe(false);
    press("m");
    press("v"); // hide the selected finding (classification has no overlay ops)
    press("j");
    press("v"); // hide det-0: its box and mask disappear
    const refs = page.lastPlan?.ops
      .filter((op) => op.kind === "box" || op.kind === "mask")
      .map((op) => ("findingRef" in op ? op.findingRef : ""));
    expect(refs).toEqual(["det-1"]);
    page.destroy();
  });

  it("undo before submit returns the card to pending", async () => {
    const page = mount(seeded());
    await page.start();
    await page.openStudy(CRITICAL);
    press("a");
    press("u");
    expect(document.querySelector(".card .card-state")?.textContent).toBe("Pending");
    expect(page.session?.hasPending).toBe(true);
    page.destroy();
  });

  it("shows an error notice when a study has no prediction", async () => {
    const svc = seeded();
    svc.addRejected("st-bad", "malformed_element");
    const page = mount(svc);
    await page.start();
    await page.openStudy("st-bad");
    expect(page.session).toBeNull();
    expect(document.querySelector(".notice")?.textContent).toContain("409");
    page.destroy();
  });
});
