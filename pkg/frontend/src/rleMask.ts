// Run-length mask decoding.
//
// The service encodes each binary mask row-major as alternating run lengths
// starting with the background run; the leading entry is 0 when the mask
// begins with foreground, and the runs always sum to width * height.

/** Foreground columns [x0, x1) of row y, in mask-local coordinates. */
export interface RowSpan {
  y: number;
  x0: number;
  x1: number;
}

function checkGeometry(runs: readonly number[], width: number, height: number): void {
  if (!Number.isInteger(width) || !Number.isInteger(height) || width <= 0 || height <= 0) {
    throw new RangeError(`mask geometry must be positive integers, got ${width}x${height}`);
  }
  let total = 0;
  for (const run of runs) {
    if (!Number.isInteger(run)) {
      throw new RangeError(`run lengths must be integers, got ${run}`);
    }
    if (run < 0) {
      throw new RangeError(`negative run length ${run}`);
    }
    total += run;
  }
  if (total !== width * height) {
    throw new RangeError(`runs sum ${total} != ${width * height}`);
  }
}

/** Expand runs to a flat row-major 0/1 grid of width * height entries. */
export function decodeRuns(runs: readonly number[], width: number, height: number): Uint8Array {
  checkGeometry(runs, width, height);
  const out = new Uint8Array(width * height);
  let pos = 0;
  let foreground = false;
  for (const run of runs) {
    if (foreground) {
      out.fill(1, pos, pos + run);
    }
    pos += run;
    foreground = !foreground;
  }
  return out;
}

/**
 * Foreground runs as per-row spans, splitting any run that crosses a row
 * boundary. Equivalent coverage to decodeRuns, convenient for painting.
 */
export function foregroundSpans(runs: readonly number[], width: number, height: number): RowSpan[] {
  checkGeometry(runs, width, height);
  const spans: RowSpan[] = [];
  let pos = 0;
  let foreground = false;
  for (const run of runs) {
    if (foreground && run > 0) {
      let start = pos;
      const end = pos + run;
      while (start < end) {
        const y = Math.floor(start / width);
        const rowEnd = Math.min(end, (y + 1) * width);
        spans.push({ y, x0: start - y * width, x1: rowEnd - y * width });
        start = rowEnd;
      }
    }
    pos += run;
    foreground = !foreground;
  }
  return spans;
}
