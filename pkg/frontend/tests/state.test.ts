import { describe, expect, it } from "vitest";

import type { SeedResponse, SessionInfo } from "../src/api.js";
import {
  MIN_SEED_POINTS,
  addPendingSeed,
  canLaunchTrack,
  clearPendingSeeds,
  initialState,
  outsideTrackedRange,
  seedAccepted,
  seedBlockReason,
  setMetrics,
  setRoiRect,
  setSlice,
  setTool,
  toggleOverlay,
  trackFailed,
  trackFinished,
  trackStarted,
  trackedRange,
  volumeOpened,
} from "../src/state.js";
import type { AppState } from "../src/state.js";

const SESSION: SessionInfo = {
  id: "s1",
  volume: "demo",
  state: "awaiting_seed",
  params: {},
};

function opened(): AppState {
  return volumeOpened(
    initialState(),
    "demo",
    { n_slices: 32, width: 128, height: 128, has_annotations: false },
    SESSION,
  );
}

function echoFor(n: number, state: "seeded" | "tracked" = "seeded"): SeedResponse {
  return {
    ...SESSION,
    state,
    start_slice: 16,
    n_keypoints: n,
    slice_index: 16,
    keypoints: Array.from({ length: n }, (_, k) => ({
      x: k,
      y: k,
      status: "live",
    })),
  };
}

function seeded(): AppState {
  let s = opened();
  for (let k = 0; k < 3; k++) {
    s = addPendingSeed(s, { x: 10 + k, y: 20 });
  }
  return seedAccepted(s, echoFor(3));
}

function tracked(): AppState {
  const s = trackStarted(seeded());
  return trackFinished(s, {
    ...SESSION,
    state: "tracked",
    stop_up: 0,
    stop_down: 31,
    n_masks: 32,
  });
}

describe("opening a volume", () => {
  it("starts a fresh session on the central slice", () => {
    const s = opened();
    expect(s.view.sessionId).toBe("s1");
    expect(s.view.sliceIndex).toBe(16);
    expect(s.view.pendingSeeds).toEqual([]);
    expect(s.session?.state).toBe("awaiting_seed");
    expect(s.metrics).toBeNull();
  });

  it("keeps the operator's tool and overlay choices", () => {
    let s = initialState();
    s = setTool(s, "draw_roi");
    s = toggleOverlay(s, "ground_truth");
    const next = volumeOpened(
      s,
      "demo",
      { n_slices: 8, width: 64, height: 64, has_annotations: true },
      SESSION,
    );
    expect(next.view.tool).toBe("draw_roi");
    expect(next.view.overlays.ground_truth).toBe(true);
    expect(next.view.sliceIndex).toBe(4);
  });
});

describe("slice scrubbing", () => {
  it("clamps the index to the volume range", () => {
    const s = opened();
    expect(setSlice(s, -5).view.sliceIndex).toBe(0);
    expect(setSlice(s, 31).view.sliceIndex).toBe(31);
    expect(setSlice(s, 99).view.sliceIndex).toBe(31);
    expect(setSlice(s, 12.6).view.sliceIndex).toBe(13);
  });
});

describe("pending seeds", () => {
  it("preserves click order, all forty of them", () => {
    let s = opened();
    for (let k = 0; k < 40; k++) {
      s = addPendingSeed(s, { x: k + 0.25, y: 2 * k });
    }
    expect(s.view.pendingSeeds.map((p) => p.x)).toEqual(
      Array.from({ length: 40 }, (_, k) => k + 0.25),
    );
  });

  it("blocks submission below the minimum with a clear message", () => {
    let s = opened();
    expect(MIN_SEED_POINTS).toBe(3);
    expect(seedBlockReason(s)).toContain("at least 3 points");
    s = addPendingSeed(s, { x: 1, y: 1 });
    s = addPendingSeed(s, { x: 2, y: 2 });
    expect(seedBlockReason(s)).toContain("(2 placed)");
    s = addPendingSeed(s, { x: 3, y: 3 });
    expect(seedBlockReason(s)).toBeNull();
  });

  it("clears on demand", () => {
    const s = addPendingSeed(opened(), { x: 1, y: 1 });
    expect(clearPendingSeeds(s).view.pendingSeeds).toEqual([]);
  });
});

describe("seed acceptance", () => {
  it("clears pending seeds once the server acknowledges", () => {
    let s = opened();
    for (let k = 0; k < 3; k++) {
      s = addPendingSeed(s, { x: k, y: k });
    }
    const next = seedAccepted(s, echoFor(3));
    expect(next.view.pendingSeeds).toEqual([]);
    expect(next.session?.state).toBe("seeded");
    expect(next.session?.n_keypoints).toBe(3);
  });

  it("re-seeding drops metrics, result state and the ROI box", () => {
    let s = tracked();
    s = setMetrics(s, {
      per_slice: { "16": 1 },
      mean: 1,
      std: 0,
      median: 1,
      iqr_low: 1,
      iqr_high: 1,
      n_evaluated: 1,
      n_zero: 0,
    }, s.epoch);
    s = setRoiRect(s, { x0: 1, y0: 1, width: 5, height: 5 });
    const next = seedAccepted(s, echoFor(5));
    expect(next.metrics).toBeNull();
    expect(next.roiRect).toBeNull();
    expect(next.session?.state).toBe("seeded");
    expect(trackedRange(next)).toBeNull();
  });

  it("advances the epoch so stale overlay fetches are dropped", () => {
    const s = seeded();
    const next = seedAccepted(s, echoFor(4));
    expect(next.epoch).toBe(s.epoch + 1);
    // a metrics response from before the re-seed must not land
    const stale = setMetrics(next, null, s.epoch);
    expect(stale).toBe(next);
  });
});

describe("tracking launch control", () => {
  it("is disabled before seeding and while a run is in flight", () => {
    expect(canLaunchTrack(opened())).toBe(false);
    const s = seeded();
    expect(canLaunchTrack(s)).toBe(true);
    const pending = trackStarted(s);
    expect(pending.trackPending).toBe(true);
    expect(canLaunchTrack(pending)).toBe(false);
  });

  it("re-enables after success and allows re-tracking", () => {
    const s = tracked();
    expect(s.trackPending).toBe(false);
    expect(canLaunchTrack(s)).toBe(true);
    expect(s.session?.state).toBe("tracked");
  });

  it("re-enables after failure and surfaces the message", () => {
    const s = trackFailed(trackStarted(seeded()), "window does not fit");
    expect(s.trackPending).toBe(false);
    expect(s.banner).toContain("window does not fit");
    expect(canLaunchTrack(s)).toBe(true);
  });
});

describe("tracked range bookkeeping", () => {
  it("reports the covered slice range", () => {
    expect(trackedRange(tracked())).toEqual([0, 31]);
    expect(trackedRange(seeded())).toBeNull();
  });

  it("flags slices the run never reached", () => {
    const s = trackFinished(trackStarted(seeded()), {
      ...SESSION,
      state: "tracked",
      stop_up: 10,
      stop_down: 20,
    });
    expect(outsideTrackedRange(s, 9)).toBe(true);
    expect(outsideTrackedRange(s, 10)).toBe(false);
    expect(outsideTrackedRange(s, 20)).toBe(false);
    expect(outsideTrackedRange(s, 21)).toBe(true);
    expect(outsideTrackedRange(seeded(), 0)).toBe(false);
  });
});

describe("overlay toggles", () => {
  it("flip independently", () => {
    const s = opened();
    const flipped = toggleOverlay(s, "mask");
    expect(flipped.view.overlays.mask).toBe(false);
    expect(flipped.view.overlays.keypoints).toBe(true);
    expect(toggleOverlay(flipped, "mask").view.overlays.mask).toBe(true);
  });
});
