import { describe, expect, it } from "vitest";

import {
  MAX_ZOOM,
  MIN_ZOOM,
  canvasToSlice,
  dragRect,
  panBy,
  roiFromDrag,
  sliceToCanvas,
  zoomAt,
} from "../src/transforms.js";
import type { Point, Viewport } from "../src/transforms.js";

// small deterministic LCG so the sweep is reproducible without a seed dep
function makeRand(seed: number): () => number {
  let s = seed >>> 0;
  return () => {
    s = (Math.imul(s, 1103515245) + 12345) >>> 0;
    return s / 2 ** 32;
  };
}

function roundTrip(view: Viewport, p: Point): number {
  const back = sliceToCanvas(view, canvasToSlice(view, p));
  return Math.hypot(back.x - p.x, back.y - p.y);
}

describe("canvas/slice round trip", () => {
  it("composes to identity within 0.5 px at zoom 1, 2 and 4", () => {
    const rand = makeRand(2024);
    for (const zoom of [1, 2, 4]) {
      for (let k = 0; k < 300; k++) {
        const view: Viewport = {
          zoom,
          panX: rand() * 200 - 100,
          panY: rand() * 200 - 100,
        };
        const p: Point = { x: rand() * 640, y: rand() * 640 };
        const err = roundTrip(view, p);
        expect(err).toBeLessThan(0.5); // the promised budget
        expect(err).toBeLessThan(1e-9); // what it actually is: float noise
      }
    }
  });

  it("holds at awkward fractional zooms too", () => {
    const rand = makeRand(7);
    for (const zoom of [0.3, 1.5, 3.7, 11.9]) {
      for (let k = 0; k < 100; k++) {
        const view: Viewport = { zoom, panX: rand() * 50, panY: rand() * 50 };
        expect(roundTrip(view, { x: rand() * 640, y: rand() * 640 })).toBeLessThan(
          1e-9,
        );
      }
    }
  });

  it("inverts in the other direction as well", () => {
    const view: Viewport = { zoom: 4, panX: 12.25, panY: -3.5 };
    const p: Point = { x: 100.125, y: 57.875 };
    const there = canvasToSlice(view, sliceToCanvas(view, p));
    expect(there.x).toBeCloseTo(p.x, 9);
    expect(there.y).toBeCloseTo(p.y, 9);
  });
});

describe("zoomAt", () => {
  it("keeps the slice point under the anchor fixed", () => {
    const view: Viewport = { zoom: 1, panX: 10, panY: 20 };
    const anchor: Point = { x: 320, y: 240 };
    const before = canvasToSlice(view, anchor);
    const zoomed = zoomAt(view, anchor, 2);
    const after = canvasToSlice(zoomed, anchor);
    expect(zoomed.zoom).toBe(2);
    expect(after.x).toBeCloseTo(before.x, 9);
    expect(after.y).toBeCloseTo(before.y, 9);
  });

  it("clamps to the zoom limits", () => {
    const view: Viewport = { zoom: 1, panX: 0, panY: 0 };
    expect(zoomAt(view, { x: 0, y: 0 }, 1e6).zoom).toBe(MAX_ZOOM);
    expect(zoomAt(view, { x: 0, y: 0 }, 1e-6).zoom).toBe(MIN_ZOOM);
  });

  it("round trip still holds after a chain of anchored zooms", () => {
    let view: Viewport = { zoom: 1, panX: 0, panY: 0 };
    const rand = makeRand(99);
    for (let k = 0; k < 20; k++) {
      view = zoomAt(view, { x: rand() * 640, y: rand() * 640 }, k % 2 ? 1.25 : 0.8);
    }
    expect(roundTrip(view, { x: 123.456, y: 321.0 })).toBeLessThan(1e-9);
  });
});

describe("panBy", () => {
  it("moves the content with the drag", () => {
    const view: Viewport = { zoom: 2, panX: 5, panY: 5 };
    const p: Point = { x: 100, y: 100 };
    const anchor = canvasToSlice(view, p);
    const dragged = panBy(view, 30, -10);
    // the same slice point now sits 30 px right and 10 px up
    const moved = sliceToCanvas(dragged, anchor);
    expect(moved.x).toBeCloseTo(130, 9);
    expect(moved.y).toBeCloseTo(90, 9);
  });
});

describe("roiFromDrag", () => {
  it("normalizes corners given in any order", () => {
    const up = roiFromDrag({ x: 40.2, y: 50.9 }, { x: 10.5, y: 20.1 }, 128, 128);
    const down = roiFromDrag({ x: 10.5, y: 20.1 }, { x: 40.2, y: 50.9 }, 128, 128);
    expect(up).toEqual({ x0: 10, y0: 20, width: 31, height: 31 });
    expect(down).toEqual(up);
  });

  it("discards zero-area drags", () => {
    expect(roiFromDrag({ x: 5, y: 5 }, { x: 5, y: 30 }, 128, 128)).toBeNull();
    expect(roiFromDrag({ x: 5, y: 5 }, { x: 30, y: 5 }, 128, 128)).toBeNull();
    expect(roiFromDrag({ x: 5, y: 5 }, { x: 5, y: 5 }, 128, 128)).toBeNull();
  });

  it("clamps a partially off-image drag to the image bounds", () => {
    const r = roiFromDrag({ x: -12.7, y: 100.2 }, { x: 30.4, y: 400 }, 128, 128);
    expect(r).toEqual({ x0: 0, y0: 100, width: 31, height: 28 });
  });

  it("discards drags entirely outside the image", () => {
    expect(roiFromDrag({ x: -50, y: -50 }, { x: -10, y: -10 }, 128, 128)).toBeNull();
    expect(roiFromDrag({ x: 200, y: 10 }, { x: 300, y: 90 }, 128, 128)).toBeNull();
  });

  it("snaps outward so the box covers every touched pixel", () => {
    const r = roiFromDrag({ x: 10.9, y: 10.1 }, { x: 12.1, y: 11.9 }, 128, 128);
    expect(r).toEqual({ x0: 10, y0: 10, width: 3, height: 2 });
  });
});

describe("dragRect", () => {
  it("is the unclamped live rectangle for feedback while dragging", () => {
    expect(dragRect({ x: 30, y: 5 }, { x: 10, y: 25 })).toEqual({
      x0: 10,
      y0: 5,
      width: 20,
      height: 20,
    });
  });
});
