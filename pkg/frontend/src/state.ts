/**
 * Client-side view state and its pure update rules.
 *
 * The engine owns all segmentation truth; what lives here is
 * presentation bookkeeping that mirrors the server's session states
 * (awaiting_seed -> seeded -> tracked). Every function returns a new
 * state object, so the render layer can treat states as values.
 */

import type { MetricsReport, SeedResponse, SessionInfo } from "./api.js";
import type { Point, Rect, Viewport } from "./transforms.js";
import { resetViewport } from "./transforms.js";

export type ToolMode = "pan" | "place_keypoint" | "draw_roi";

export interface OverlayToggles {
  keypoints: boolean;
  hull: boolean;
  mask: boolean;
  ground_truth: boolean;
}

export interface ViewState {
  sessionId: string | null;
  sliceIndex: number;
  overlays: OverlayToggles;
  tool: ToolMode;
  /** click order preserved; cleared once the server accepts a seed */
  pendingSeeds: Point[];
  viewport: Viewport;
}

export interface AppState {
  view: ViewState;
  volumeName: string | null;
  nSlices: number;
  imageWidth: number;
  imageHeight: number;
  hasAnnotations: boolean;
  session: SessionInfo | null;
  /** completed ROI drag awaiting submission, slice coordinates */
  roiRect: Rect | null;
  metrics: MetricsReport | null;
  /** at most one tracking run in flight; launch stays disabled meanwhile */
  trackPending: boolean;
  /** non-modal notice line; fetch failures land here, never in a dialog */
  banner: string | null;
  /** bumped whenever overlays go stale (re-seed); old fetches are dropped */
  epoch: number;
}

export const MIN_SEED_POINTS = 3;

export function initialState(): AppState {
  return {
    view: {
      sessionId: null,
      sliceIndex: 0,
      overlays: { keypoints: true, hull: true, mask: true, ground_truth: false },
      tool: "place_keypoint",
      pendingSeeds: [],
      viewport: resetViewport(),
    },
    volumeName: null,
    nSlices: 0,
    imageWidth: 0,
    imageHeight: 0,
    hasAnnotations: false,
    session: null,
    roiRect: null,
    metrics: null,
    trackPending: false,
    banner: null,
    epoch: 0,
  };
}

function withView(s: AppState, patch: Partial<ViewState>): AppState {
  return { ...s, view: { ...s.view, ...patch } };
}

/** Fresh session on a newly selected volume; lands on the central slice. */
export function volumeOpened(
  s: AppState,
  name: string,
  detail: { n_slices: number; width: number; height: number; has_annotations: boolean },
  session: SessionInfo,
): AppState {
  return {
    ...initialState(),
    view: {
      ...initialState().view,
      sessionId: session.id,
      sliceIndex: Math.floor(detail.n_slices / 2),
      tool: s.view.tool,
      overlays: s.view.overlays,
    },
    volumeName: name,
    nSlices: detail.n_slices,
    imageWidth: detail.width,
    imageHeight: detail.height,
    hasAnnotations: detail.has_annotations,
    session,
    epoch: s.epoch + 1,
  };
}

export function setSlice(s: AppState, index: number): AppState {
  const top = Math.max(0, s.nSlices - 1);
  const clamped = Math.min(top, Math.max(0, Math.round(index)));
  return withView(s, { sliceIndex: clamped });
}

export function setTool(s: AppState, tool: ToolMode): AppState {
  return withView(s, { tool });
}

export function toggleOverlay(s: AppState, key: keyof OverlayToggles): AppState {
  return withView(s, {
    overlays: { ...s.view.overlays, [key]: !s.view.overlays[key] },
  });
}

export function setViewport(s: AppState, viewport: Viewport): AppState {
  return withView(s, { viewport });
}

export function addPendingSeed(s: AppState, p: Point): AppState {
  return withView(s, { pendingSeeds: [...s.view.pendingSeeds, p] });
}

export function clearPendingSeeds(s: AppState): AppState {
  return withView(s, { pendingSeeds: [] });
}

export function setRoiRect(s: AppState, r: Rect | null): AppState {
  return { ...s, roiRect: r };
}

/**
 * Why a manual submission cannot go out yet, or null when it can.
 * Mirrors the server-side minimum so the round trip is never wasted.
 */
export function seedBlockReason(s: AppState): string | null {
  const n = s.view.pendingSeeds.length;
  if (n < MIN_SEED_POINTS) {
    return `place at least ${MIN_SEED_POINTS} points before seeding (${n} placed)`;
  }
  return null;
}

/**
 * Server accepted a seed. Pending clicks are cleared, any previous
 * tracking result and metrics are dropped, and the epoch advances so
 * in-flight overlay fetches from the old result are never rendered.
 */
export function seedAccepted(s: AppState, echo: SeedResponse): AppState {
  const { slice_index, keypoints, ...session } = echo;
  return {
    ...withView(s, { pendingSeeds: [] }),
    session,
    roiRect: null,
    metrics: null,
    banner: null,
    epoch: s.epoch + 1,
  };
}

export function canLaunchTrack(s: AppState): boolean {
  return (
    !s.trackPending &&
    s.session !== null &&
    (s.session.state === "seeded" || s.session.state === "tracked")
  );
}

export function trackStarted(s: AppState): AppState {
  return { ...s, trackPending: true, banner: null };
}

export function trackFinished(s: AppState, session: SessionInfo): AppState {
  return { ...s, trackPending: false, session, epoch: s.epoch + 1 };
}

export function trackFailed(s: AppState, message: string): AppState {
  return { ...s, trackPending: false, banner: message };
}

export function setMetrics(
  s: AppState,
  metrics: MetricsReport | null,
  epoch: number,
): AppState {
  if (epoch !== s.epoch) {
    return s; // answer to a question nobody is asking any more
  }
  return { ...s, metrics };
}

export function setBanner(s: AppState, message: string | null): AppState {
  return { ...s, banner: message };
}

/** Slice range that tracking actually covered, or null before tracking. */
export function trackedRange(s: AppState): [number, number] | null {
  const ses = s.session;
  if (
    ses === null ||
    ses.state !== "tracked" ||
    ses.stop_up === undefined ||
    ses.stop_down === undefined
  ) {
    return null;
  }
  return [ses.stop_up, ses.stop_down];
}

/** True on tracked sessions for slices the run never reached. */
export function outsideTrackedRange(s: AppState, index: number): boolean {
  const range = trackedRange(s);
  if (range === null) {
    return false;
  }
  return index < range[0] || index > range[1];
}
