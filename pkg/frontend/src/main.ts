/**
 * DOM wiring for the slice viewer.
 *
 * All state transitions run through the pure helpers in state.ts and
 * every server interaction goes through the api.ts client; this file
 * only translates DOM events into those calls and paints the results.
 */

import { ApiError, makeClient } from "./api.js";
import type { SlicePoints } from "./api.js";
import { render } from "./overlay.js";
import type { Canvas2D, ImageLike, Scene } from "./overlay.js";
import * as st from "./state.js";
import {
  canvasToSlice,
  dragRect,
  panBy,
  resetViewport,
  roiFromDrag,
  zoomAt,
} from "./transforms.js";
import type { Point, Rect } from "./transforms.js";

const client = makeClient("");

let state = st.initialState();

// bitmap cache for the current epoch; re-seeding clears it so stale
// overlays can never reappear
const bitmaps = new Map<string, Promise<ImageBitmap | null>>();
let renderedEpoch = 0;
let refreshSeq = 0;

// live drag bookkeeping (canvas pixels for pan, slice coords for ROI)
let panGrab: Point | null = null;
let roiStart: Point | null = null;
let roiLive: Rect | null = null;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

const canvas = el<HTMLCanvasElement>("view");
const ctx = canvas.getContext("2d") as unknown as Canvas2D;
const volumeSelect = el<HTMLSelectElement>("volume");
const slider = el<HTMLInputElement>("slice");
const sliceLabel = el<HTMLSpanElement>("slice-label");
const seedButton = el<HTMLButtonElement>("seed");
const clearButton = el<HTMLButtonElement>("clear-seeds");
const trackButton = el<HTMLButtonElement>("track");
const resetButton = el<HTMLButtonElement>("reset-view");
const thresholdInput = el<HTMLInputElement>("threshold");
const banner = el<HTMLDivElement>("banner");
const statusLine = el<HTMLSpanElement>("status");
const metricsPanel = el<HTMLDivElement>("metrics");

function apply(next: st.AppState): void {
  state = next;
  if (state.epoch !== renderedEpoch) {
    bitmaps.clear();
    renderedEpoch = state.epoch;
  }
  syncControls();
  void refresh();
}

/** Repaint controls from state; cheap enough to run on every change. */
function syncControls(): void {
  slider.max = String(Math.max(0, state.nSlices - 1));
  slider.value = String(state.view.sliceIndex);
  sliceLabel.textContent = state.nSlices
    ? `slice ${state.view.sliceIndex} / ${state.nSlices - 1}`
    : "no volume";

  const ses = state.session;
  const bits: string[] = [];
  if (ses) {
    bits.push(ses.state);
    if (ses.n_keypoints !== undefined) {
      bits.push(`${ses.n_keypoints} seed points on slice ${ses.start_slice}`);
    }
    if (ses.stop_up !== undefined && ses.stop_down !== undefined) {
      bits.push(`tracked ${ses.stop_up}..${ses.stop_down}`);
    }
  }
  if (state.view.pendingSeeds.length) {
    bits.push(`${state.view.pendingSeeds.length} pending clicks`);
  }
  statusLine.textContent = bits.join(" | ");

  trackButton.disabled = !st.canLaunchTrack(state);
  trackButton.textContent = state.trackPending ? "tracking..." : "track";
  seedButton.disabled = state.session === null || state.trackPending;

  banner.textContent = state.banner ?? "";
  banner.classList.toggle("hidden", state.banner === null);

  for (const key of ["keypoints", "hull", "mask", "ground_truth"] as const) {
    el<HTMLInputElement>(`overlay-${key}`).checked = state.view.overlays[key];
  }
  for (const mode of ["pan", "place_keypoint", "draw_roi"] as const) {
    el<HTMLInputElement>(`tool-${mode}`).checked = state.view.tool === mode;
  }

  renderMetrics();
}

function renderMetrics(): void {
  if (!state.hasAnnotations) {
    metricsPanel.textContent = "no annotations for this volume";
    return;
  }
  const m = state.metrics;
  if (!m) {
    metricsPanel.textContent =
      state.session?.state === "tracked" ? "metrics pending..." : "track to see metrics";
    return;
  }
  const here = m.per_slice[String(state.view.sliceIndex)];
  const fmt = (v: number) => v.toFixed(3);
  metricsPanel.innerHTML = [
    `<div class="metric"><b>DSC here</b> ${here === undefined ? "-" : fmt(here)}</div>`,
    `<div class="metric"><b>mean</b> ${fmt(m.mean)} &plusmn; ${fmt(m.std)}</div>`,
    `<div class="metric"><b>median</b> ${fmt(m.median)}</div>`,
    `<div class="metric"><b>IQR</b> ${fmt(m.iqr_low)} .. ${fmt(m.iqr_high)}</div>`,
    `<div class="metric"><b>evaluated</b> ${m.n_evaluated} (${m.n_zero} zero)</div>`,
  ].join("");
}

function loadBitmap(url: string): Promise<ImageBitmap | null> {
  let hit = bitmaps.get(url);
  if (!hit) {
    hit = fetch(url)
      .then((res) => (res.ok ? res.blob().then(createImageBitmap) : null))
      .catch(() => null);
    bitmaps.set(url, hit);
  }
  return hit;
}

async function fetchPoints(index: number): Promise<SlicePoints | null> {
  const sid = state.view.sessionId;
  if (!sid || !state.session || state.session.state === "awaiting_seed") {
    return null;
  }
  try {
    return await client.slicePoints(sid, index);
  } catch (err) {
    if (err instanceof ApiError && (err.status === 404 || err.status === 409)) {
      return null; // nothing tracked here; not an error worth a banner
    }
    throw err;
  }
}

/** Assemble the scene for the current slice and paint it. */
async function refresh(): Promise<void> {
  const seq = ++refreshSeq;
  const epoch = state.epoch;
  const index = state.view.sliceIndex;
  const name = state.volumeName;

  let scene: Scene = {
    width: canvas.width,
    height: canvas.height,
    base: null,
    overlay: null,
    truth: null,
    points: null,
    maskMissing: false,
    roiDraft: roiLive ?? state.roiRect,
  };

  if (name) {
    const sid = state.view.sessionId;
    const tracked = state.session?.state === "tracked";
    const [base, overlay, truth, points] = await Promise.all([
      loadBitmap(client.sliceUrl(name, index)),
      tracked && sid && state.view.overlays.mask
        ? loadBitmap(client.overlayUrl(sid, index))
        : Promise.resolve(null),
      state.hasAnnotations && state.view.overlays.ground_truth
        ? loadBitmap(client.truthUrl(name, index))
        : Promise.resolve(null),
      fetchPoints(index).catch(() => null),
    ]);
    // a newer refresh or a re-seed owns the canvas now; drop this scene
    if (seq !== refreshSeq || epoch !== state.epoch) {
      return;
    }
    scene = {
      ...scene,
      base: base as ImageLike | null,
      overlay: overlay as ImageLike | null,
      truth: truth as ImageLike | null,
      points,
      maskMissing:
        tracked && (st.outsideTrackedRange(state, index) || points?.hull == null),
    };
  }

  render(ctx, state.view, scene);
}

function canvasPoint(ev: MouseEvent): Point {
  const box = canvas.getBoundingClientRect();
  return {
    x: ((ev.clientX - box.left) / box.width) * canvas.width,
    y: ((ev.clientY - box.top) / box.height) * canvas.height,
  };
}

async function openVolume(name: string): Promise<void> {
  try {
    const detail = await client.volume(name);
    const session = await client.createSession(name);
    apply(st.volumeOpened(state, name, detail, session));
  } catch (err) {
    apply(st.setBanner(state, `cannot open volume: ${describe(err)}`));
  }
}

function describe(err: unknown): string {
  return err instanceof Error ? err.message : String(err);
}

async function submitSeed(): Promise<void> {
  const sid = state.view.sessionId;
  if (!sid) {
    return;
  }
  const index = state.view.sliceIndex;
  try {
    if (state.view.tool === "draw_roi") {
      if (!state.roiRect) {
        apply(st.setBanner(state, "drag a box over the structure first"));
        return;
      }
      const raw = thresholdInput.value.trim();
      const detect = raw ? { threshold: Number(raw) } : undefined;
      const echo = await client.seedAuto(sid, state.roiRect, index, detect);
      apply(st.seedAccepted(state, echo));
    } else {
      const reason = st.seedBlockReason(state);
      if (reason) {
        apply(st.setBanner(state, reason));
        return;
      }
      const echo = await client.seedManual(sid, state.view.pendingSeeds, index);
      apply(st.seedAccepted(state, echo));
    }
  } catch (err) {
    const hint =
      err instanceof ApiError && state.view.tool === "draw_roi"
        ? " - try a lower detection threshold or a larger box"
        : "";
    apply(st.setBanner(state, describe(err) + hint));
  }
}

async function launchTrack(): Promise<void> {
  const sid = state.view.sessionId;
  if (!sid || !st.canLaunchTrack(state)) {
    return;
  }
  apply(st.trackStarted(state));
  try {
    const session = await client.track(sid);
    apply(st.trackFinished(state, session));
    if (state.hasAnnotations) {
      const epoch = state.epoch;
      try {
        const metrics = await client.metrics(sid);
        apply(st.setMetrics(state, metrics, epoch));
      } catch (err) {
        apply(st.setBanner(state, `metrics unavailable: ${describe(err)}`));
      }
    }
  } catch (err) {
    apply(st.trackFailed(state, describe(err)));
  }
}

function wireEvents(): void {
  volumeSelect.addEventListener("change", () => {
    void openVolume(volumeSelect.value);
  });

  slider.addEventListener("input", () => {
    apply(st.setSlice(state, Number(slider.value)));
  });

  for (const mode of ["pan", "place_keypoint", "draw_roi"] as const) {
    el<HTMLInputElement>(`tool-${mode}`).addEventListener("change", () => {
      apply(st.setTool(state, mode));
    });
  }
  for (const key of ["keypoints", "hull", "mask", "ground_truth"] as const) {
    el<HTMLInputElement>(`overlay-${key}`).addEventListener("change", () => {
      apply(st.toggleOverlay(state, key));
    });
  }

  seedButton.addEventListener("click", () => void submitSeed());
  trackButton.addEventListener("click", () => void launchTrack());
  clearButton.addEventListener("click", () => {
    apply(st.setRoiRect(st.clearPendingSeeds(state), null));
  });
  resetButton.addEventListener("click", () => {
    apply(st.setViewport(state, resetViewport()));
  });

  canvas.addEventListener("mousedown", (ev) => {
    const p = canvasPoint(ev);
    if (state.view.tool === "pan" || ev.button === 1) {
      panGrab = p;
    } else if (state.view.tool === "draw_roi" && ev.button === 0) {
      roiStart = canvasToSlice(state.view.viewport, p);
      roiLive = null;
    }
  });

  canvas.addEventListener("mousemove", (ev) => {
    const p = canvasPoint(ev);
    if (panGrab) {
      const moved = panBy(state.view.viewport, p.x - panGrab.x, p.y - panGrab.y);
      panGrab = p;
      apply(st.setViewport(state, moved));
    } else if (roiStart) {
      roiLive = dragRect(roiStart, canvasToSlice(state.view.viewport, p));
      void refresh();
    }
  });

  const endDrag = (ev: MouseEvent) => {
    if (panGrab) {
      panGrab = null;
      return;
    }
    if (roiStart) {
      const end = canvasToSlice(state.view.viewport, canvasPoint(ev));
      // degenerate drags vanish; everything else is clamped to the image
      const rect = roiFromDrag(roiStart, end, state.imageWidth, state.imageHeight);
      roiStart = null;
      roiLive = null;
      apply(st.setRoiRect(state, rect));
    }
  };
  canvas.addEventListener("mouseup", endDrag);
  canvas.addEventListener("mouseleave", endDrag);

  canvas.addEventListener("click", (ev) => {
    if (state.view.tool !== "place_keypoint" || !state.volumeName) {
      return;
    }
    const p = canvasToSlice(state.view.viewport, canvasPoint(ev));
    apply(st.addPendingSeed(state, p));
  });

  canvas.addEventListener(
    "wheel",
    (ev) => {
      ev.preventDefault();
      const factor = ev.deltaY < 0 ? 1.25 : 0.8;
      apply(
        st.setViewport(state, zoomAt(state.view.viewport, canvasPoint(ev), factor)),
      );
    },
    { passive: false },
  );
}

async function boot(): Promise<void> {
  wireEvents();
  try {
    const { volumes } = await client.listVolumes();
    volumeSelect.innerHTML = "";
    for (const v of volumes) {
      const opt = document.createElement("option");
      opt.value = v.name;
      opt.textContent = `${v.name} (${v.n_slices} slices)`;
      volumeSelect.appendChild(opt);
    }
    const first = volumes[0];
    if (first) {
      volumeSelect.value = first.name;
      await openVolume(first.name);
    } else {
      apply(st.setBanner(state, "no volumes under the served root"));
    }
  } catch (err) {
    apply(st.setBanner(state, `cannot reach service: ${describe(err)}`));
  }
}

void boot();
