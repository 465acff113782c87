import { describe, expect, it } from "vitest";
import { StrokeRecorder } from "../src/strokes.js";

describe("StrokeRecorder", () => {
  it("records begin/extend/end as one stroke", () => {
    const rec = new StrokeRecorder(64, 64);
    rec.begin(10, 10, 8);
    rec.extend(20, 15);
    rec.extend(30, 30);
    rec.end();
    expect(rec.count).toBe(1);
    expect(rec.all()[0].points).toEqual([
      [10, 10],
      [20, 15],
      [30, 30],
    ]);
  });

  it("serializes to the exact service payload shape", () => {
    const rec = new StrokeRecorder(128, 96);
    rec.begin(5, 6, 12);
    rec.extend(50, 40);
    rec.end();
    const payload = rec.toPayload();
    expect(payload).toEqual({
      width: 128,
      height: 96,
      strokes: [{ points: [[5, 6], [50, 40]], width: 12 }],
    });
    expect(JSON.parse(JSON.stringify(payload))).toEqual(payload);
  });

  it("clamps points to the canvas", () => {
    const rec = new StrokeRecorder(32, 32);
    rec.begin(-5, 100, 4);
    rec.end();
    expect(rec.all()[0].points).toEqual([[0, 31]]);
  });

  it("drops duplicate consecutive points", () => {
    const rec = new StrokeRecorder(32, 32);
    rec.begin(3, 3, 4);
    rec.extend(3.2, 3.4); // rounds to (3, 3) again
    rec.extend(4, 4);
    rec.end();
    expect(rec.all()[0].points).toEqual([
      [3, 3],
      [4, 4],
    ]);
  });

  it("undo removes the active stroke first, then committed ones", () => {
    const rec = new StrokeRecorder(32, 32);
    rec.begin(1, 1, 4);
    rec.end();
    rec.begin(2, 2, 4);
    expect(rec.undo()).toBe(true); // active stroke
    expect(rec.count).toBe(1);
    expect(rec.undo()).toBe(true); // committed stroke
    expect(rec.count).toBe(0);
    expect(rec.undo()).toBe(false);
  });

  it("clear empties everything", () => {
    const rec = new StrokeRecorder(32, 32);
    rec.begin(1, 1, 4);
    rec.end();
    rec.clear();
    expect(rec.count).toBe(0);
    expect(rec.toPayload().strokes).toEqual([]);
  });

  it("rejects bad sizes and brush widths", () => {
    expect(() => new StrokeRecorder(0, 10)).toThrow();
    const rec = new StrokeRecorder(8, 8);
    expect(() => rec.begin(1, 1, 0)).toThrow();
  });
});
