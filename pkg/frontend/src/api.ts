/**
 * Typed client for the tracking service.
 *
 * Every mutation the UI performs goes through one of these calls; the
 * client never touches segmentation state any other way. `fetchImpl` is
 * injectable so tests can record traffic without a server.
 */

import type { Point, Rect } from "./transforms.js";

export interface VolumeSummary {
  name: string;
  n_slices: number;
}

export interface VolumeDetail {
  name: string;
  n_slices: number;
  width: number;
  height: number;
  source_ids: string[];
  has_annotations: boolean;
}

export interface TrackParamsPayload {
  pyramid_levels?: number;
  window_radius?: number;
  max_iterations?: number;
  convergence_eps?: number;
  min_eigenvalue?: number;
  fb_error_max?: number | null;
}

export interface DetectParamsPayload {
  threshold?: number;
  threshold_mode?: "quantile" | "absolute";
  min_spacing?: number;
  max_keypoints?: number;
}

export type SessionState = "awaiting_seed" | "seeded" | "tracked";

export interface SessionInfo {
  id: string;
  volume: string;
  state: SessionState;
  params: Record<string, number | null>;
  start_slice?: number;
  n_keypoints?: number;
  stop_up?: number;
  stop_down?: number;
  n_masks?: number;
}

export interface KeypointPayload {
  x: number;
  y: number;
  status: string;
}

export interface SeedResponse extends SessionInfo {
  slice_index: number;
  keypoints: KeypointPayload[];
}

export interface SlicePoints {
  slice_index: number;
  keypoints: KeypointPayload[];
  hull: [number, number][] | null;
}

export interface MetricsReport {
  per_slice: Record<string, number>;
  mean: number;
  std: number;
  median: number;
  iqr_low: number;
  iqr_high: number;
  n_evaluated: number;
  n_zero: number;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    detail: string,
  ) {
    super(detail);
    this.name = "ApiError";
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

async function errorDetail(res: Response): Promise<string> {
  try {
    const body = await res.json();
    if (body && typeof body.detail === "string") {
      return body.detail;
    }
  } catch {
    // non-JSON error body; fall through to the status line
  }
  return `request failed with status ${res.status}`;
}

export function makeClient(base: string, fetchImpl?: FetchLike) {
  const doFetch: FetchLike = fetchImpl ?? ((url, init) => fetch(url, init));

  async function getJson<T>(path: string): Promise<T> {
    const res = await doFetch(`${base}${path}`);
    if (!res.ok) {
      throw new ApiError(res.status, await errorDetail(res));
    }
    return res.json() as Promise<T>;
  }

  async function postJson<T>(path: string, body: unknown): Promise<T> {
    const res = await doFetch(`${base}${path}`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!res.ok) {
      throw new ApiError(res.status, await errorDetail(res));
    }
    return res.json() as Promise<T>;
  }

  async function getBytes(path: string): Promise<ArrayBuffer> {
    const res = await doFetch(`${base}${path}`);
    if (!res.ok) {
      throw new ApiError(res.status, await errorDetail(res));
    }
    return res.arrayBuffer();
  }

  return {
    listVolumes: () => getJson<{ volumes: VolumeSummary[] }>("/volumes"),

    volume: (name: string) => getJson<VolumeDetail>(`/volumes/${name}`),

    sliceUrl: (name: string, index: number) =>
      `${base}/volumes/${name}/slices/${index}`,

    truthUrl: (name: string, index: number, label?: string) =>
      `${base}/volumes/${name}/slices/${index}/truth` +
      (label ? `?label=${encodeURIComponent(label)}` : ""),

    createSession: (volume: string, params?: TrackParamsPayload) =>
      postJson<SessionInfo>("/sessions", params ? { volume, params } : { volume }),

    session: (id: string) => getJson<SessionInfo>(`/sessions/${id}`),

    seedManual: (id: string, points: Point[], startSlice: number) =>
      postJson<SeedResponse>(`/sessions/${id}/seed`, {
        mode: "manual",
        points: points.map((p) => [p.x, p.y]),
        start_slice: startSlice,
      }),

    seedAuto: (
      id: string,
      roi: Rect,
      startSlice: number,
      detect?: DetectParamsPayload,
    ) =>
      postJson<SeedResponse>(`/sessions/${id}/seed`, {
        mode: "auto",
        roi: { x0: roi.x0, y0: roi.y0, width: roi.width, height: roi.height },
        start_slice: startSlice,
        ...(detect ? { detect } : {}),
      }),

    track: (id: string, params?: TrackParamsPayload) =>
      postJson<SessionInfo>(`/sessions/${id}/track`, params ? { params } : {}),

    slicePoints: (id: string, index: number) =>
      getJson<SlicePoints>(`/sessions/${id}/slices/${index}/keypoints`),

    maskBytes: (id: string, index: number) =>
      getBytes(`/sessions/${id}/slices/${index}/mask`),

    overlayUrl: (id: string, index: number) =>
      `${base}/sessions/${id}/slices/${index}/overlay`,

    metrics: (id: string, label?: string) =>
      getJson<MetricsReport>(
        `/sessions/${id}/metrics` +
          (label ? `?label=${encodeURIComponent(label)}` : ""),
      ),
  };
}

export type Client = ReturnType<typeof makeClient>;
