/**
 * Canvas <-> slice coordinate transforms and rectangle helpers.
 *
 * Slice coordinates are continuous source-image pixels: pixel column j
 * spans [j, j+1), matching how the engine rasterizes hulls and how
 * drawImage paints the slice onto the canvas. The viewport maps them to
 * canvas pixels by canvas = (slice - pan) * zoom. Everything here is
 * pure; the round trip composes to identity within floating-point
 * noise, far inside the 0.5 px budget the UI promises.
 */

export interface Point {
  x: number;
  y: number;
}

export interface Viewport {
  /** canvas pixels per slice pixel, > 0 */
  zoom: number;
  /** slice coordinate rendered at the canvas origin */
  panX: number;
  panY: number;
}

export interface Rect {
  x0: number;
  y0: number;
  width: number;
  height: number;
}

export const MIN_ZOOM = 0.25;
export const MAX_ZOOM = 16;

export function canvasToSlice(view: Viewport, p: Point): Point {
  return { x: view.panX + p.x / view.zoom, y: view.panY + p.y / view.zoom };
}

export function sliceToCanvas(view: Viewport, p: Point): Point {
  return { x: (p.x - view.panX) * view.zoom, y: (p.y - view.panY) * view.zoom };
}

/** New viewport with the slice point under `anchor` (canvas px) unmoved. */
export function zoomAt(view: Viewport, anchor: Point, factor: number): Viewport {
  const zoom = Math.min(MAX_ZOOM, Math.max(MIN_ZOOM, view.zoom * factor));
  const fixed = canvasToSlice(view, anchor);
  return {
    zoom,
    panX: fixed.x - anchor.x / zoom,
    panY: fixed.y - anchor.y / zoom,
  };
}

/** Viewport shifted so the content follows a canvas-space drag. */
export function panBy(view: Viewport, dxCanvas: number, dyCanvas: number): Viewport {
  return {
    zoom: view.zoom,
    panX: view.panX - dxCanvas / view.zoom,
    panY: view.panY - dyCanvas / view.zoom,
  };
}

/** Zoom 1:1 with the slice's top-left at the canvas origin. */
export function resetViewport(): Viewport {
  return { zoom: 1, panX: 0, panY: 0 };
}

/**
 * Integer detection box from a drag gesture given in slice coordinates.
 *
 * The corners may arrive in any order. A drag that is degenerate in
 * either axis is discarded (returns null), and the box is clamped to the
 * image bounds before it is handed to the service; a drag entirely
 * outside the image clamps to nothing and is likewise discarded.
 */
export function roiFromDrag(
  a: Point,
  b: Point,
  imageWidth: number,
  imageHeight: number,
): Rect | null {
  if (a.x === b.x || a.y === b.y) {
    return null;
  }
  const x0 = Math.max(0, Math.floor(Math.min(a.x, b.x)));
  const y0 = Math.max(0, Math.floor(Math.min(a.y, b.y)));
  const x1 = Math.min(imageWidth, Math.ceil(Math.max(a.x, b.x)));
  const y1 = Math.min(imageHeight, Math.ceil(Math.max(a.y, b.y)));
  if (x1 - x0 <= 0 || y1 - y0 <= 0) {
    return null;
  }
  return { x0, y0, width: x1 - x0, height: y1 - y0 };
}

/** Axis-aligned rectangle between two slice-space corners, unclamped. */
export function dragRect(a: Point, b: Point): Rect {
  const x0 = Math.min(a.x, b.x);
  const y0 = Math.min(a.y, b.y);
  return { x0, y0, width: Math.abs(a.x - b.x), height: Math.abs(a.y - b.y) };
}
