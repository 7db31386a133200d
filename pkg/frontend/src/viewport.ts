// Image <-> viewport coordinate mapping.
//
// Every overlay coordinate in the client goes through the one affine matrix
// held here (and its exact inverse); nothing else does coordinate math.
// The mapping is uniform scale plus translation, no rotation or shear:
//
//   viewport.x = zoom * image.x + panX        [ zoom  0     panX ]
//   viewport.y = zoom * image.y + panY        [ 0     zoom  panY ]
//
//   image.x = (viewport.x - panX) / zoom
//   image.y = (viewport.y - panY) / zoom
//
// Both axes point the usual raster way: +x right, +y down.

export interface Point {
  x: number;
  y: number;
}

/** Axis-aligned box in (x1, y1)-(x2, y2) corner form. */
export interface Box {
  x1: number;
  y1: number;
  x2: number;
  y2: number;
}

export class Viewport {
  private zoomLevel: number;
  private panX: number;
  private panY: number;

  constructor(zoom = 1, panX = 0, panY = 0) {
    if (!Number.isFinite(zoom) || zoom <= 0) {
      throw new RangeError(`zoom must be a positive number, got ${zoom}`);
    }
    this.zoomLevel = zoom;
    this.panX = panX;
    this.panY = panY;
  }

  get zoom(): number {
    return this.zoomLevel;
  }

  get pan(): Point {
    return { x: this.panX, y: this.panY };
  }

  /** Affine coefficients [a, b, c, d, e, f] in canvas setTransform order. */
  matrix(): [number, number, number, number, number, number] {
    return [this.zoomLevel, 0, 0, this.zoomLevel, this.panX, this.panY];
  }

  toViewport(p: Point): Point {
    return {
      x: this.zoomLevel * p.x + this.panX,
      y: this.zoomLevel * p.y + this.panY,
    };
  }

  toImage(p: Point): Point {
    return {
      x: (p.x - this.panX) / this.zoomLevel,
      y: (p.y - this.panY) / this.zoomLevel,
    };
  }

  boxToViewport(b: Box): Box {
    const tl = this.toViewport({ x: b.x1, y: b.y1 });
    const br = this.toViewport({ x: b.x2, y: b.y2 });
    return { x1: tl.x, y1: tl.y, x2: br.x, y2: br.y };
  }

  boxToImage(b: Box): Box {
    const tl = this.toImage({ x: b.x1, y: b.y1 });
    const br = this.toImage({ x: b.x2, y: b.y2 });
    return { x1: tl.x, y1: tl.y, x2: br.x, y2: br.y };
  }

  /** Shift the view by a viewport-space delta. */
  panBy(dx: number, dy: number): void {
    this.panX += dx;
    this.panY += dy;
  }

  /** Scale by `factor` keeping the image point under `anchor` (viewport px) fixed. */
  zoomAt(anchor: Point, factor: number): void {
    const next = this.zoomLevel * factor;
    if (!Number.isFinite(next) || next <= 0) {
      throw new RangeError(`zoom factor ${factor} leaves no usable zoom`);
    }
    const pivot = this.toImage(anchor);
    this.zoomLevel = next;
    this.panX = anchor.x - next * pivot.x;
    this.panY = anchor.y - next * pivot.y;
  }

  reset(): void {
    this.zoomLevel = 1;
    this.panX = 0;
    this.panY = 0;
  }
}
