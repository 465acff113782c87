// Vector brushstroke model. The server rasterizes these payloads with the
// same code that generates training masks, so the studio never has to
// guarantee pixel-exact agreement with its own preview.

export interface Stroke {
  points: [number, number][];
  width: number;
}

export interface StrokePayload {
  width: number;
  height: number;
  strokes: { points: [number, number][]; width: number }[];
}

export class StrokeRecorder {
  readonly width: number;
  readonly height: number;
  private strokes: Stroke[] = [];
  private active: Stroke | null = null;

  constructor(width: number, height: number) {
    if (width <= 0 || height <= 0) throw new Error(`bad canvas size ${width}x${height}`);
    this.width = width;
    this.height = height;
  }

  begin(x: number, y: number, brushWidth: number): void {
    if (brushWidth <= 0) throw new Error(`bad brush width ${brushWidth}`);
    this.active = { points: [this.clampPoint(x, y)], width: brushWidth };
  }

  extend(x: number, y: number): void {
    if (!this.active) return;
    const p = this.clampPoint(x, y);
    const last = this.active.points[this.active.points.length - 1];
    if (p[0] === last[0] && p[1] === last[1]) return;
    this.active.points.push(p);
  }

  end(): void {
    if (!this.active) return;
    this.strokes.push(this.active);
    this.active = null;
  }

  undo(): boolean {
    if (this.active) {
      this.active = null;
      return true;
    }
    return this.strokes.pop() !== undefined;
  }

  clear(): void {
    this.strokes = [];
    this.active = null;
  }

  get count(): number {
    return this.strokes.length;
  }

  all(): Stroke[] {
    const out = this.strokes.slice();
    if (this.active) out.push(this.active);
    return out;
  }

  toPayload(): StrokePayload {
    return {
      width: this.width,
      height: this.height,
      strokes: this.all().map((s) => ({
        points: s.points.map(([x, y]) => [x, y] as [number, number]),
        width: s.width,
      })),
    };
  }

  private clampPoint(x: number, y: number): [number, number] {
    const cx = Math.min(this.width - 1, Math.max(0, Math.round(x)));
    const cy = Math.min(this.height - 1, Math.max(0, Math.round(y)));
    return [cx, cy];
  }
}
