/**
 * Canvas compositing for the slice view.
 *
 * `render` is a pure function of the fetched images and the view state:
 * it repaints from scratch on every call and keeps no state of its own.
 * The context parameter is the small structural slice of the 2D canvas
 * API the renderer actually uses, so tests can hand in a recorder
 * instead of a real canvas.
 */

import type { SlicePoints } from "./api.js";
import type { Rect } from "./transforms.js";
import { sliceToCanvas } from "./transforms.js";
import type { ViewState } from "./state.js";

export interface ImageLike {
  readonly width: number;
  readonly height: number;
}

export interface Canvas2D {
  lineWidth: number;
  strokeStyle: string;
  fillStyle: string;
  font: string;
  globalAlpha: number;
  clearRect(x: number, y: number, w: number, h: number): void;
  drawImage(img: ImageLike, dx: number, dy: number, dw: number, dh: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  closePath(): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  stroke(): void;
  fill(): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  strokeRect(x: number, y: number, w: number, h: number): void;
  fillText(text: string, x: number, y: number): void;
  measureText(text: string): { width: number };
  save(): void;
  restore(): void;
}

/** Everything fetched from the service that the current view can show. */
export interface Scene {
  /** canvas size in device pixels */
  width: number;
  height: number;
  /** raw slice image */
  base: ImageLike | null;
  /** server-blended prediction overlay (slice + mask tint) */
  overlay: ImageLike | null;
  /** transparent-except-annotation ground truth tint */
  truth: ImageLike | null;
  /** tracked or seeded points for this slice, with hull when present */
  points: SlicePoints | null;
  /** tracked session but no mask on this slice */
  maskMissing: boolean;
  /** ROI drag in progress or awaiting submission, slice coordinates */
  roiDraft: Rect | null;
}

// the ROI box stays red by convention; everything else keeps its own hue
export const ROI_COLOR = "#ff3333";
export const KEYPOINT_COLOR = "#3ddc84";
export const LOST_COLOR = "#9aa0a6";
export const PENDING_COLOR = "#ffd23f";
export const HULL_COLOR = "#4fa7ff";
export const ENDED_NOTE = "tracking ended here";

function drawImageLayer(ctx: Canvas2D, view: ViewState, img: ImageLike): void {
  const origin = sliceToCanvas(view.viewport, { x: 0, y: 0 });
  const zoom = view.viewport.zoom;
  ctx.drawImage(img, origin.x, origin.y, img.width * zoom, img.height * zoom);
}

function drawDot(
  ctx: Canvas2D,
  view: ViewState,
  x: number,
  y: number,
  color: string,
): void {
  const c = sliceToCanvas(view.viewport, { x, y });
  ctx.beginPath();
  ctx.arc(c.x, c.y, 3.5, 0, 2 * Math.PI);
  ctx.fillStyle = color;
  ctx.fill();
}

function drawHull(ctx: Canvas2D, view: ViewState, hull: [number, number][]): void {
  if (hull.length === 0) {
    return;
  }
  ctx.beginPath();
  const first = sliceToCanvas(view.viewport, { x: hull[0]![0], y: hull[0]![1] });
  ctx.moveTo(first.x, first.y);
  for (const [x, y] of hull.slice(1)) {
    const c = sliceToCanvas(view.viewport, { x, y });
    ctx.lineTo(c.x, c.y);
  }
  ctx.closePath();
  ctx.strokeStyle = HULL_COLOR;
  ctx.lineWidth = 1.5;
  ctx.stroke();
}

function drawRoi(ctx: Canvas2D, view: ViewState, r: Rect): void {
  const tl = sliceToCanvas(view.viewport, { x: r.x0, y: r.y0 });
  const zoom = view.viewport.zoom;
  ctx.strokeStyle = ROI_COLOR;
  ctx.lineWidth = 2;
  ctx.strokeRect(tl.x, tl.y, r.width * zoom, r.height * zoom);
}

function drawEndedNote(ctx: Canvas2D, scene: Scene): void {
  ctx.font = "14px system-ui, sans-serif";
  const pad = 8;
  const w = ctx.measureText(ENDED_NOTE).width + 2 * pad;
  const x = (scene.width - w) / 2;
  ctx.fillStyle = "rgba(20, 20, 24, 0.8)";
  ctx.fillRect(x, 12, w, 26);
  ctx.fillStyle = "#ffb0b0";
  ctx.fillText(ENDED_NOTE, x + pad, 30);
}

export function render(ctx: Canvas2D, view: ViewState, scene: Scene): void {
  ctx.save();
  ctx.clearRect(0, 0, scene.width, scene.height);

  // the prediction overlay is the slice with the mask already blended
  // in, so when it is shown it replaces the base layer outright
  const baseLayer = view.overlays.mask && scene.overlay ? scene.overlay : scene.base;
  if (baseLayer) {
    drawImageLayer(ctx, view, baseLayer);
  }
  if (view.overlays.ground_truth && scene.truth) {
    drawImageLayer(ctx, view, scene.truth);
  }

  const points = scene.points;
  if (points) {
    if (view.overlays.hull && points.hull) {
      drawHull(ctx, view, points.hull);
    }
    if (view.overlays.keypoints) {
      for (const p of points.keypoints) {
        drawDot(ctx, view, p.x, p.y, p.status === "live" ? KEYPOINT_COLOR : LOST_COLOR);
      }
    }
  }

  for (const p of view.pendingSeeds) {
    drawDot(ctx, view, p.x, p.y, PENDING_COLOR);
  }

  if (scene.roiDraft) {
    drawRoi(ctx, view, scene.roiDraft);
  }

  if (scene.maskMissing && view.overlays.mask) {
    drawEndedNote(ctx, scene);
  }

  ctx.restore();
}
