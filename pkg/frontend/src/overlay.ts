// Overlay composition.
//
// buildOverlay turns a prediction's boxes and masks into a flat list of draw
// operations already expressed in viewport pixels, all of it routed through
// the one Viewport matrix. Keeping the plan as plain data keeps the
// coordinate arithmetic testable without a canvas; paintOverlay then walks
// the plan against a 2D context.

import { foregroundSpans } from "./rleMask.js";
import type { Detection, MaskRecord } from "./types.js";
import type { Box } from "./viewport.js";
import { Viewport } from "./viewport.js";

/** Masks composite at half strength so the anatomy stays readable under them. */
export const MASK_OPACITY = 0.5;

/** Finding ref the service assigns to the detection at `index`. */
export function detectionRef(index: number): string {
  return `det-${index}`;
}

export type OverlayOp =
  | { kind: "image"; dest: Box }
  | { kind: "placeholder"; dest: Box; note: string }
  | { kind: "mask"; findingRef: string; label: string; opacity: number; rects: Box[] }
  | { kind: "box"; findingRef: string; label: string; score: number; rect: Box };

export interface OverlayPlan {
  /** Backdrop first, then masks, then boxes on top. */
  ops: OverlayOp[];
  /** The image frame in viewport pixels (for clears and hit testing). */
  frame: Box;
}

export interface OverlayArgs {
  /** Whether pixel data is available; when false the backdrop is a placeholder. */
  hasImage: boolean;
  frameWidth: number;
  frameHeight: number;
  detections: readonly Detection[];
  masks: readonly MaskRecord[];
  viewport: Viewport;
  /** Finding refs whose box and mask are toggled off. */
  hiddenFindings?: ReadonlySet<string>;
  /** Global mask toggle; off means boxes only. */
  showMasks?: boolean;
}

export function buildOverlay(args: OverlayArgs): OverlayPlan {
  const hidden = args.hiddenFindings ?? new Set<string>();
  const showMasks = args.showMasks ?? true;
  const vp = args.viewport;
  const frame = vp.boxToViewport({
    x1: 0,
    y1: 0,
    x2: args.frameWidth,
    y2: args.frameHeight,
  });

  const ops: OverlayOp[] = [];
  if (args.hasImage) {
    ops.push({ kind: "image", dest: frame });
  } else {
    ops.push({ kind: "placeholder", dest: frame, note: "no image available" });
  }

  if (showMasks) {
    for (const mask of args.masks) {
      if (hidden.has(mask.finding_id)) {
        continue;
      }
      const rects = foregroundSpans(mask.rle, mask.width, mask.height).map((span) =>
        vp.boxToViewport({
          x1: mask.x + span.x0,
          y1: mask.y + span.y,
          x2: mask.x + span.x1,
          y2: mask.y + span.y + 1,
        }),
      );
      ops.push({
        kind: "mask",
        findingRef: mask.finding_id,
        label: mask.label,
        opacity: MASK_OPACITY,
        rects,
      });
    }
  }

  args.detections.forEach((det, index) => {
    const ref = detectionRef(index);
    if (hidden.has(ref)) {
      return;
    }
    ops.push({
      kind: "box",
      findingRef: ref,
      label: det.label,
      score: det.score,
      rect: vp.boxToViewport({ x1: det.x1, y1: det.y1, x2: det.x2, y2: det.y2 }),
    });
  });

  return { ops, frame };
}

/** Stable per-label color so a finding keeps its hue across repaints. */
export function colorFor(label: string): string {
  let hash = 0;
  for (let i = 0; i < label.length; i++) {
    hash = (hash * 31 + label.charCodeAt(i)) >>> 0;
  }
  return `hsl(${hash % 360}, 85%, 55%)`;
}

/** The 2D-context subset the painter needs; CanvasRenderingContext2D satisfies it. */
export interface OverlayCanvas {
  globalAlpha: number;
  fillStyle: string | CanvasGradient | CanvasPattern;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  font: string;
  fillRect(x: number, y: number, w: number, h: number): void;
  strokeRect(x: number, y: number, w: number, h: number): void;
  fillText(text: string, x: number, y: number): void;
  clearRect(x: number, y: number, w: number, h: number): void;
  drawImage(image: CanvasImageSource, dx: number, dy: number, dw: number, dh: number): void;
  save(): void;
  restore(): void;
}

function width(b: Box): number {
  return b.x2 - b.x1;
}

function height(b: Box): number {
  return b.y2 - b.y1;
}

export function paintOverlay(
  ctx: OverlayCanvas,
  plan: OverlayPlan,
  image: CanvasImageSource | null = null,
): void {
  for (const op of plan.ops) {
    switch (op.kind) {
      case "image":
        if (image !== null) {
          ctx.drawImage(image, op.dest.x1, op.dest.y1, width(op.dest), height(op.dest));
        } else {
          paintPlaceholder(ctx, op.dest, "no image available");
        }
        break;
      case "placeholder":
        paintPlaceholder(ctx, op.dest, op.note);
        break;
      case "mask":
        ctx.save();
        ctx.globalAlpha = op.opacity;
        ctx.fillStyle = colorFor(op.label);
        for (const rect of op.rects) {
          ctx.fillRect(rect.x1, rect.y1, width(rect), height(rect));
        }
        ctx.restore();
        break;
      case "box":
        ctx.strokeStyle = colorFor(op.label);
        ctx.lineWidth = 2;
        ctx.strokeRect(op.rect.x1, op.rect.y1, width(op.rect), height(op.rect));
        ctx.fillStyle = colorFor(op.label);
        ctx.font = "12px sans-serif";
        ctx.fillText(
          `${op.label} ${(op.score * 100).toFixed(0)}%`,
          op.rect.x1,
          Math.max(10, op.rect.y1 - 4),
        );
        break;
    }
  }
}

function paintPlaceholder(ctx: OverlayCanvas, dest: Box, note: string): void {
  ctx.save();
  ctx.fillStyle = "#1c2128";
  ctx.fillRect(dest.x1, dest.y1, width(dest), height(dest));
  ctx.fillStyle = "#8b949e";
  ctx.font = "14px sans-serif";
  ctx.fillText(note, dest.x1 + 12, dest.y1 + 24);
  ctx.restore();
}
