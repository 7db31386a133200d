// Single-page review desk.
//
// Wires the worklist, the review session, and the overlay canvas together
// against one TriageClient. All state shown here is rebuilt from server
// answers; the page keeps only presentation choices (selection, zoom,
// visibility toggles) locally.

import type { TriageClient } from "./apiClient.js";
import { commandForKey, keyboardLegend } from "./keyboard.js";
import type { ReviewCommand } from "./keyboard.js";
import { buildOverlay, paintOverlay } from "./overlay.js";
import type { OverlayPlan } from "./overlay.js";
import { ReviewSession } from "./reviewSession.js";
import type { CardState } from "./reviewSession.js";
import { Viewport } from "./viewport.js";
import { WorklistView } from "./worklist.js";

export type DeskNotice =
  | { kind: "idle" }
  | { kind: "info"; text: string }
  | { kind: "error"; text: string };

export interface ReviewDeskOptions {
  /** Side of the square prediction pixel grid the overlays live in. */
  frameSize?: number;
  /** Canvas size in device pixels. */
  canvasSize?: number;
}

interface CardBadge {
  label: string;
  tone: "pending" | "accepted" | "rejected" | "busy" | "failed";
}

function cardBadge(state: CardState): CardBadge {
  switch (state.kind) {
    case "pending":
      return { label: "Pending", tone: "pending" };
    case "marked":
      return { label: `${state.verdict} (unsent)`, tone: state.verdict === "Accepted" ? "accepted" : "rejected" };
    case "submitting":
      return { label: "Sending...", tone: "busy" };
    case "confirmed":
      return { label: state.verdict, tone: state.verdict === "Accepted" ? "accepted" : "rejected" };
    case "failed":
      return { label: `Failed (${state.status})`, tone: "failed" };
  }
}

const STATUS_FILTERS = ["", "AwaitingReview", "Reviewed", "Rejected"] as const;

export class ReviewDeskPage {
  readonly view = new WorklistView();
  session: ReviewSession | null = null;
  viewport = new Viewport();
  notice: DeskNotice = { kind: "idle" };
  readonly hiddenFindings = new Set<string>();
  showMasks = true;
  /** The most recent overlay plan, kept for environments without a 2D context. */
  lastPlan: OverlayPlan | null = null;

  private readonly root: HTMLElement;
  private readonly client: TriageClient;
  private readonly frameSize: number;
  private readonly canvas: HTMLCanvasElement;
  private readonly worklistBody: HTMLElement;
  private readonly cardsBox: HTMLElement;
  private readonly submitButton: HTMLButtonElement;
  private readonly noticeBox: HTMLElement;
  private readonly statusSelect: HTMLSelectElement;
  private readonly studyTitle: HTMLElement;
  private readonly keyHandler: (ev: KeyboardEvent) => void;

  constructor(root: HTMLElement, client: TriageClient, opts: ReviewDeskOptions = {}) {
    this.root = root;
    this.client = client;
    this.frameSize = opts.frameSize ?? 512;
    const doc = root.ownerDocument;
    const el = <K extends keyof HTMLElementTagNameMap>(
      tag: K,
      cls: string,
      parent: HTMLElement,
    ): HTMLElementTagNameMap[K] => {
      const node = doc.createElement(tag);
      node.className = cls;
      parent.appendChild(node);
      return node;
    };

    root.replaceChildren();
    const desk = el("div", "desk", root);

    const header = el("header", "desk-header", desk);
    el("h1", "desk-title", header).textContent = "Review desk";
    el("span", "desk-reviewer", header).textContent = client.reviewerId ?? "no reviewer";
    this.statusSelect = el("select", "status-filter", header);
    for (const value of STATUS_FILTERS) {
      const option = doc.createElement("option");
      option.value = value;
      option.textContent = value === "" ? "All statuses" : value;
      this.statusSelect.appendChild(option);
    }
    this.statusSelect.addEventListener("change", () => {
      this.view.setFilter("status", this.statusSelect.value || undefined);
      void this.refreshWorklist();
    });
    const refresh = el("button", "refresh", header);
    refresh.textContent = "Refresh";
    refresh.addEventListener("click", () => void this.refreshWorklist());

    const main = el("main", "desk-main", desk);
    const worklistPane = el("section", "worklist", main);
    const table = el("table", "worklist-table", worklistPane);
    const head = el("thead", "", table);
    const headRow = el("tr", "", head);
    for (const title of ["Study", "Status", "Triage", "Decision", "Age", "Sex"]) {
      el("th", "", headRow).textContent = title;
    }
    this.worklistBody = el("tbody", "", table);

    const studyPane = el("section", "study", main);
    this.studyTitle = el("h2", "study-title", studyPane);
    this.studyTitle.textContent = "Select a study";
    const viewBar = el("div", "view-bar", studyPane);
    for (const [text, action] of [
      ["+", () => this.zoomBy(1.25)],
      ["-", () => this.zoomBy(0.8)],
      ["reset", () => this.resetView()],
    ] as const) {
      const button = el("button", "view-button", viewBar);
      button.textContent = text;
      button.addEventListener("click", action);
    }
    this.canvas = el("canvas", "overlay-canvas", studyPane);
    this.canvas.width = opts.canvasSize ?? 768;
    this.canvas.height = opts.canvasSize ?? 768;
    this.cardsBox = el("div", "cards", studyPane);
    this.submitButton = el("button", "submit", studyPane);
    this.submitButton.textContent = "Submit verdicts";
    this.submitButton.addEventListener("click", () => void this.submitVerdicts());
    this.noticeBox = el("div", "notice", studyPane);
    const legend = el("footer", "legend", studyPane);
    legend.textContent = keyboardLegend()
      .map((entry) => `${entry.keys}: ${entry.action}`)
      .join("  |  ");

    this.keyHandler = (ev) => {
      const target = ev.target as HTMLElement | null;
      if (target && (target.tagName === "INPUT" || target.tagName === "SELECT" || target.tagName === "TEXTAREA")) {
        return;
      }
      const command = commandForKey(ev.key);
      if (command) {
        ev.preventDefault();
        this.handleCommand(command);
      }
    };
    doc.addEventListener("keydown", this.keyHandler);
  }

  destroy(): void {
    this.root.ownerDocument.removeEventListener("keydown", this.keyHandler);
  }

  async start(): Promise<void> {
    await this.refreshWorklist();
  }

  async refreshWorklist(): Promise<void> {
    try {
      await this.view.refresh(this.client);
    } catch (err) {
      this.notice = { kind: "error", text: err instanceof Error ? err.message : String(err) };
    }
    this.render();
  }

  async openStudy(studyId: string): Promise<void> {
    try {
      this.session = await ReviewSession.load(this.client, studyId);
      this.view.noteDecision(studyId, this.session.prediction.decision);
      this.hiddenFindings.clear();
      this.showMasks = true;
      this.resetView();
      this.notice = { kind: "idle" };
    } catch (err) {
      this.session = null;
      this.notice = { kind: "error", text: err instanceof Error ? err.message : String(err) };
    }
    this.render();
  }

  async submitVerdicts(): Promise<void> {
    const session = this.session;
    if (!session || !session.canSubmit) {
      return;
    }
    this.render();
    const report = await session.submit(this.client);
    const parts: string[] = [];
    const confirmed = report.outcomes.filter((o) => o.kind === "confirmed").length;
    if (confirmed > 0) {
      parts.push(`${confirmed} verdict${confirmed === 1 ? "" : "s"} recorded`);
    }
    for (const outcome of report.outcomes) {
      if (outcome.kind === "refused") {
        parts.push(`${outcome.ref}: refused (${outcome.status} ${outcome.detail})`);
      } else if (outcome.kind === "unreachable") {
        parts.push(`${outcome.ref}: no answer after ${outcome.attempts} attempts`);
      }
    }
    if (session.reviewed) {
      parts.push("study Reviewed");
    }
    this.notice = { kind: "info", text: parts.join("; ") || "nothing to submit" };
    await this.refreshWorklist();
  }

  handleCommand(command: ReviewCommand): void {
    const session = this.session;
    switch (command.kind) {
      case "accept-selected":
        if (session?.selectedCard) {
          session.accept(session.selectedCard.ref);
        }
        break;
      case "reject-selected":
        if (session?.selectedCard) {
          session.reject(session.selectedCard.ref);
        }
        break;
      case "undo-selected":
        if (session?.selectedCard) {
          session.undo(session.selectedCard.ref);
        }
        break;
      case "select-next":
        session?.selectNext();
        break;
      case "select-prev":
        session?.selectPrev();
        break;
      case "submit":
        void this.submitVerdicts();
        return;
      case "toggle-masks":
        this.showMasks = !this.showMasks;
        break;
      case "toggle-selected-overlay": {
        const ref = session?.selectedCard?.ref;
        if (ref) {
          if (this.hiddenFindings.has(ref)) {
            this.hiddenFindings.delete(ref);
          } else {
            this.hiddenFindings.add(ref);
          }
        }
        break;
      }
    }
    this.render();
  }

  private zoomBy(factor: number): void {
    this.viewport.zoomAt({ x: this.canvas.width / 2, y: this.canvas.height / 2 }, factor);
    this.render();
  }

  private resetView(): void {
    this.viewport = new Viewport(this.canvas.width / this.frameSize);
  }

  render(): void {
    this.renderWorklist();
    this.renderStudy();
    this.renderCanvas();
  }

  private renderWorklist(): void {
    const doc = this.root.ownerDocument;
    this.worklistBody.replaceChildren();
    for (const row of this.view.rowViews()) {
      const tr = doc.createElement("tr");
      tr.className = `worklist-row tone-${row.triage.tone}`;
      if (this.session?.studyId === row.studyId) {
        tr.classList.add("selected");
      }
      tr.dataset.studyId = row.studyId;
      const cells = [
        row.studyId.slice(0, 12),
        row.status,
        row.triage.label,
        row.decision ?? "-",
        row.ageBand,
        row.sex,
      ];
      for (const text of cells) {
        const td = doc.createElement("td");
        td.textContent = text;
        tr.appendChild(td);
      }
      tr.addEventListener("click", () => void this.openStudy(row.studyId));
      this.worklistBody.appendChild(tr);
    }
  }

  private renderStudy(): void {
    const doc = this.root.ownerDocument;
    const session = this.session;
    this.cardsBox.replaceChildren();
    this.studyTitle.textContent = session
      ? `${session.studyId.slice(0, 12)} (${session.studyStatus})`
      : "Select a study";
    if (session) {
      session.cards.forEach((card, index) => {
        const node = doc.createElement("div");
        const badge = cardBadge(card.state);
        node.className = `card state-${badge.tone}`;
        if (index === session.selected) {
          node.classList.add("selected");
        }
        node.dataset.ref = card.ref;
        const title = doc.createElement("span");
        title.className = "card-label";
        title.textContent = `${card.label} ${(card.score * 100).toFixed(0)}%`;
        node.appendChild(title);
        const state = doc.createElement("span");
        state.className = "card-state";
        state.textContent = badge.label;
        node.appendChild(state);
        for (const [text, handler] of [
          ["Accept", () => session.accept(card.ref)],
          ["Reject", () => session.reject(card.ref)],
          ["Undo", () => session.undo(card.ref)],
        ] as const) {
          const button = doc.createElement("button");
          button.textContent = text;
          button.addEventListener("click", () => {
            handler();
            this.render();
          });
          node.appendChild(button);
        }
        node.addEventListener("click", () => {
          session.selected = index;
          this.render();
        });
        this.cardsBox.appendChild(node);
      });
    }
    this.submitButton.disabled = !session?.canSubmit;
    this.noticeBox.className = `notice notice-${this.notice.kind}`;
    this.noticeBox.textContent = this.notice.kind === "idle" ? "" : this.notice.text;
  }

  private renderCanvas(): void {
    const session = this.session;
    if (!session) {
      this.lastPlan = null;
      return;
    }
    this.lastPlan = buildOverlay({
      hasImage: false,
      frameWidth: this.frameSize,
      frameHeight: this.frameSize,
      detections: session.prediction.detections,
      masks: session.prediction.masks,
      viewport: this.viewport,
      hiddenFindings: this.hiddenFindings,
      showMasks: this.showMasks,
    });
    const ctx = typeof this.canvas.getContext === "function" ? this.canvas.getContext("2d") : null;
    if (ctx) {
      ctx.clearRect(0, 0, this.canvas.width, this.canvas.height);
      paintOverlay(ctx, this.lastPlan);
    }
  }
}
