import { describe, expect, it } from "vitest";

import {
  AttributeMap,
  BrushState,
  paintStroke,
  strokeBounds,
} from "../src/attrmap.js";

const fullBrush = (map: AttributeMap, value: number): BrushState => ({
  channel: 0,
  value,
  radius: Math.hypot(map.width, map.height),
  softness: 0,
});

describe("AttributeMap", () => {
  it("starts all-zero with matching dimensions", () => {
    const map = new AttributeMap(7, 5);
    expect(map.width).toBe(7);
    expect(map.height).toBe(5);
    for (const plane of map.planes) {
      expect(plane.every((v) => v === 0)).toBe(true);
    }
  });

  it("clamps written values to [0,1]", () => {
    const map = new AttributeMap(4, 4);
    map.set(1, 0, 0, 1.5);
    map.set(1, 1, 0, -0.5);
    expect(map.get(1, 0, 0)).toBe(1);
    expect(map.get(1, 1, 0)).toBe(0);
  });

  it("gradientFill is a linear ramp over columns", () => {
    const map = new AttributeMap(3, 2);
    map.gradientFill(0, 0, 1, "horizontal");
    expect([map.get(0, 0, 0), map.get(0, 1, 0), map.get(0, 2, 0)])
      .toEqual([0, 0.5, 1]);
    expect(map.planes[1].every((v) => v === 0)).toBe(true);
  });

  it("degenerate gradient equals constant fill", () => {
    const a = new AttributeMap(5, 4);
    const b = new AttributeMap(5, 4);
    a.gradientFill(2, 0.3, 0.3, "vertical");
    b.fillChannel(2, 0.3);
    expect(Array.from(a.planes[2])).toEqual(Array.from(b.planes[2]));
  });
});

describe("paintStroke", () => {
  it("full-coverage stroke at value v equals constant fill", () => {
    const map = new AttributeMap(32, 24);
    paintStroke(map, fullBrush(map, 0.7), [{ x: 16, y: 12 }]);
    const expected = new AttributeMap(32, 24);
    expected.fillChannel(0, 0.7);
    expect(Array.from(map.planes[0])).toEqual(Array.from(expected.planes[0]));
  });

  it("zero-length path changes nothing", () => {
    const map = new AttributeMap(16, 16);
    map.fillChannel(0, 0.25);
    const before = Array.from(map.planes[0]);
    paintStroke(map, fullBrush(map, 1), []);
    expect(Array.from(map.planes[0])).toEqual(before);
  });

  it("touches only the selected plane", () => {
    const map = new AttributeMap(20, 20);
    paintStroke(map, { channel: 1, value: 1, radius: 5, softness: 0.5 },
                [{ x: 10, y: 10 }]);
    expect(map.get(1, 10, 10)).toBeCloseTo(1, 5);
    expect(map.planes[0].every((v) => v === 0)).toBe(true);
    expect(map.planes[2].every((v) => v === 0)).toBe(true);
  });

  it("out-of-bounds points are clipped, not fatal", () => {
    const map = new AttributeMap(10, 10);
    paintStroke(map, { channel: 0, value: 1, radius: 4, softness: 0 },
                [{ x: -30, y: -30 }, { x: 40, y: 40 }]);
    expect(map.planes[0].some((v) => v > 0)).toBe(true);
  });

  it("soft brush fades toward the rim", () => {
    const map = new AttributeMap(41, 41);
    paintStroke(map, { channel: 0, value: 1, radius: 18, softness: 1 },
                [{ x: 20, y: 20 }]);
    const center = map.get(0, 20, 20);
    const mid = map.get(0, 29, 20);
    const rim = map.get(0, 37, 20);
    expect(center).toBeGreaterThan(mid);
    expect(mid).toBeGreaterThan(rim);
  });

  it("strokeBounds clips to the canvas", () => {
    const map = new AttributeMap(10, 10);
    const rect = strokeBounds(map, { channel: 0, value: 1, radius: 6, softness: 0 },
                              [{ x: 1, y: 1 }]);
    expect(rect.x0).toBe(0);
    expect(rect.y0).toBe(0);
    expect(rect.x1).toBeLessThanOrEqual(10);
    expect(rect.y1).toBeLessThanOrEqual(10);
  });
});
