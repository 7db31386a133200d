// Keyboard-first review bindings.
//
// Reviewers work through a queue of thousands of studies a day, so every
// review action has a single-keystroke form. The mapping is pure data in and
// data out; the page decides what each command does to its state.

export type ReviewCommand =
  | { kind: "accept-selected" }
  | { kind: "reject-selected" }
  | { kind: "undo-selected" }
  | { kind: "select-next" }
  | { kind: "select-prev" }
  | { kind: "submit" }
  | { kind: "toggle-masks" }
  | { kind: "toggle-selected-overlay" };

export function commandForKey(key: string): ReviewCommand | null {
  switch (key) {
    case "a":
      return { kind: "accept-selected" };
    case "x":
      return { kind: "reject-selected" };
    case "u":
      return { kind: "undo-selected" };
    case "j":
    case "ArrowDown":
      return { kind: "select-next" };
    case "k":
    case "ArrowUp":
      return { kind: "select-prev" };
    case "s":
      return { kind: "submit" };
    case "m":
      return { kind: "toggle-masks" };
    case "v":
      return { kind: "toggle-selected-overlay" };
    default:
      return null;
  }
}

export interface LegendEntry {
  keys: string;
  action: string;
  command: ReviewCommand["kind"];
}

/** One row per command, for the help footer. */
export function keyboardLegend(): LegendEntry[] {
  return [
    { keys: "a", action: "accept finding", command: "accept-selected" },
    { keys: "x", action: "reject finding", command: "reject-selected" },
    { keys: "u", action: "undo mark", command: "undo-selected" },
    { keys: "j / down", action: "next finding", command: "select-next" },
    { keys: "k / up", action: "previous finding", command: "select-prev" },
    { keys: "s", action: "submit verdicts", command: "submit" },
    { keys: "m", action: "toggle all masks", command: "toggle-masks" },
    { keys: "v", action: "toggle this overlay", command: "toggle-selected-overlay" },
  ];
}
