// Worklist presentation state.
//
// Rows are stored exactly as the server returns them: the service already
// orders Critical studies first, then arrival order, and the client never
// reorders. Filters are forwarded verbatim as query parameters so the server
// stays the single authority on membership too.

import type { TriageClient, WorklistFilters } from "./apiClient.js";
import type { Decision, TriageClass, WorklistRow } from "./types.js";

export type WorklistState =
  | { kind: "idle" }
  | { kind: "loading" }
  | { kind: "ready"; fetchedAt: number }
  | { kind: "error"; message: string };

export interface TriageBadge {
  label: string;
  tone: "critical" | "routine" | "none";
}

export function triageBadge(triage: TriageClass | null): TriageBadge {
  switch (triage) {
    case "Critical":
      return { label: "Critical", tone: "critical" };
    case "Routine":
      return { label: "Routine", tone: "routine" };
    default:
      return { label: "-", tone: "none" };
  }
}

/** A row ready for display; same order as the wire rows, one view per row. */
export interface WorklistRowView {
  studyId: string;
  status: string;
  triage: TriageBadge;
  /** Known once the study's predictions have been opened; null until then. */
  decision: Decision | null;
  ageBand: string;
  sex: string;
}

export class WorklistView {
  rows: WorklistRow[] = [];
  filters: WorklistFilters = {};
  state: WorklistState = { kind: "idle" };
  private readonly decisions = new Map<string, Decision>();

  async refresh(client: TriageClient): Promise<void> {
    this.state = { kind: "loading" };
    try {
      this.rows = await client.worklist(this.filters);
    } catch (err) {
      this.state = { kind: "error", message: err instanceof Error ? err.message : String(err) };
      throw err;
    }
    this.state = { kind: "ready", fetchedAt: Date.now() };
  }

  setFilter(key: keyof WorklistFilters, value: string | undefined): void {
    if (value === undefined || value === "") {
      delete this.filters[key];
    } else {
      this.filters[key] = value;
    }
  }

  clearFilters(): void {
    this.filters = {};
  }

  /**
   * The worklist payload carries no decision column; remember each study's
   * decision as its predictions are opened so the table can show it.
   */
  noteDecision(studyId: string, decision: Decision): void {
    this.decisions.set(studyId, decision);
  }

  rowViews(): WorklistRowView[] {
    return this.rows.map((row) => ({
      studyId: row.study_id,
      status: row.status,
      triage: triageBadge(row.triage),
      decision: this.decisions.get(row.study_id) ?? null,
      ageBand: row.age_band ?? "-",
      sex: row.sex ?? "-",
    }));
  }
}
