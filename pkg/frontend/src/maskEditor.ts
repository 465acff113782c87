// Local mask editing: an op log of paint/erase strokes replayed onto a
// binary pixel buffer. The paint rasterizer mirrors the server's
// distance-to-segment stamp (round caps, dist <= width/2) so straight
// strokes agree pixel-for-pixel; the server stays the authority for any
// mask it actually uses.

import { Stroke, StrokePayload } from "./strokes.js";

export type MaskOp = { mode: "paint" | "erase"; stroke: Stroke };

export function stampSegment(
  buf: Uint8Array,
  w: number,
  h: number,
  p0: [number, number],
  p1: [number, number],
  radius: number,
  value: 0 | 1,
): void {
  const [x0, y0] = p0;
  const [x1, y1] = p1;
  const loX = Math.max(Math.floor(Math.min(x0, x1) - radius) - 1, 0);
  const hiX = Math.min(Math.ceil(Math.max(x0, x1) + radius) + 1, w - 1);
  const loY = Math.max(Math.floor(Math.min(y0, y1) - radius) - 1, 0);
  const hiY = Math.min(Math.ceil(Math.max(y0, y1) + radius) + 1, h - 1);
  if (loX > hiX || loY > hiY) return;
  const dx = x1 - x0;
  const dy = y1 - y0;
  const seg2 = dx * dx + dy * dy;
  const r2 = radius * radius;
  for (let y = loY; y <= hiY; y++) {
    for (let x = loX; x <= hiX; x++) {
      let t = 0;
      if (seg2 > 0) t = Math.min(1, Math.max(0, ((x - x0) * dx + (y - y0) * dy) / seg2));
      const cx = x0 + t * dx;
      const cy = y0 + t * dy;
      const ddx = x - cx;
      const ddy = y - cy;
      if (ddx * ddx + ddy * ddy <= r2) buf[y * w + x] = value;
    }
  }
}

export function rasterizeStroke(
  buf: Uint8Array,
  w: number,
  h: number,
  stroke: Stroke,
  value: 0 | 1,
): void {
  if (stroke.width < 1) throw new Error("stroke width must be >= 1 px");
  const radius = stroke.width / 2;
  const pts = stroke.points;
  if (pts.length === 0) return;
  if (pts.length === 1) {
    stampSegment(buf, w, h, pts[0], pts[0], radius, value);
    return;
  }
  for (let i = 1; i < pts.length; i++) {
    stampSegment(buf, w, h, pts[i - 1], pts[i], radius, value);
  }
}

export class MaskEditor {
  readonly width: number;
  readonly height: number;
  private ops: MaskOp[] = [];
  private buf: Uint8Array;
  private imported: Uint8Array | null = null; // base layer from a PNG import

  constructor(width: number, height: number) {
    if (width <= 0 || height <= 0) throw new Error(`bad mask size ${width}x${height}`);
    this.width = width;
    this.height = height;
    this.buf = new Uint8Array(width * height);
  }

  apply(op: MaskOp): void {
    this.ops.push(op);
    rasterizeStroke(this.buf, this.width, this.height, op.stroke, op.mode === "paint" ? 1 : 0);
  }

  undo(): boolean {
    if (this.ops.length === 0) return false;
    this.ops.pop();
    this.replay();
    return true;
  }

  clear(): void {
    this.ops = [];
    this.imported = null;
    this.buf.fill(0);
  }

  importPixels(pixels: Uint8Array): void {
    if (pixels.length !== this.width * this.height) {
      throw new Error(`imported mask has ${pixels.length} pixels, canvas needs ${this.width * this.height}`);
    }
    this.imported = Uint8Array.from(pixels, (v) => (v ? 1 : 0));
    this.ops = [];
    this.replay();
  }

  pixels(): Uint8Array {
    return this.buf.slice();
  }

  holeFraction(): number {
    let n = 0;
    for (const v of this.buf) n += v;
    return n / this.buf.length;
  }

  isEmpty(): boolean {
    return this.buf.every((v) => v === 0);
  }

  // A pure paint-stroke session serializes to the vector payload the server
  // rasterizes itself; erases or imports force the PNG path.
  toStrokePayload(): StrokePayload | null {
    if (this.imported !== null) return null;
    if (this.ops.some((op) => op.mode === "erase")) return null;
    return {
      width: this.width,
      height: this.height,
      strokes: this.ops.map((op) => ({
        points: op.stroke.points.map(([x, y]) => [x, y] as [number, number]),
        width: op.stroke.width,
      })),
    };
  }

  private replay(): void {
    this.buf = this.imported ? this.imported.slice() : new Uint8Array(this.width * this.height);
    for (const op of this.ops) {
      rasterizeStroke(this.buf, this.width, this.height, op.stroke, op.mode === "paint" ? 1 : 0);
    }
  }
}
