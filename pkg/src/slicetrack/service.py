"""HTTP session service for interactive seeding and tracking.

One process serves a root directory of volumes (one subdirectory of slice
images per volume, with optional ground truth under <volume>/annotations).
Clients create sessions, submit seeds (manual points or an auto-detection
ROI), trigger tracking, then fetch per-slice keypoints, hulls, masks,
alpha-blended overlays, ground-truth tints, and metrics. Sessions live in
memory; each one
serializes its own mutations behind a lock, so concurrent sessions are
independent.
"""

from __future__ import annotations

import threading
import uuid
from dataclasses import dataclass, field
from io import BytesIO
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException, Response
from PIL import Image

from . import io, pipeline
from .core import KeypointSet, Roi, TrackParams, Volume
from .errors import SliceTrackError, ValidationError
from .pipeline import SeedSpec, SegmentationResult
from .wavelet import DetectParams

OVERLAY_RGB = (255, 64, 64)
OVERLAY_ALPHA = 0.4
TRUTH_RGBA = (64, 208, 96, 102)
ANNOTATION_SUBDIR = "annotations"


@dataclass
class Session:
    """Mutable per-client state; guarded by its own lock."""

    id: str
    volume_name: str
    volume: Volume
    params: TrackParams
    seed: SeedSpec | None = None
    seed_points: KeypointSet | None = None
    result: SegmentationResult | None = None
    lock: threading.Lock = field(default_factory=threading.Lock)

    @property
    def state(self) -> str:
        if self.result is not None:
            return "tracked"
        if self.seed is not None:
            return "seeded"
        return "awaiting_seed"


class VolumeStore:
    """Lazy, cached loader for the volume directories under one root."""

    def __init__(self, root: str | Path, pattern: str = "*.png"):
        self.root = Path(root)
        self.pattern = pattern
        self._cache: dict[str, Volume] = {}
        self._lock = threading.Lock()

    def names(self) -> list[str]:
        if not self.root.is_dir():
            return []
        return sorted(
            p.name
            for p in self.root.iterdir()
            if p.is_dir() and any(p.glob(self.pattern))
        )

    def slice_count(self, name: str) -> int:
        return len(list((self.root / name).glob(self.pattern)))

    def annotation_dir(self, name: str) -> Path | None:
        path = self.root / name / ANNOTATION_SUBDIR
        return path if path.is_dir() else None

    def get(self, name: str) -> Volume:
        if "/" in name or name in (".", ".."):
            raise HTTPException(404, f"unknown volume {name!r}")
        with self._lock:
            if name not in self._cache:
                if name not in self.names():
                    raise HTTPException(404, f"unknown volume {name!r}")
                self._cache[name] = io.load_volume(
                    self.root / name, pattern=self.pattern
                )
            return self._cache[name]


def _track_params_from(payload: dict | None, base: TrackParams) -> TrackParams:
    if not payload:
        return base
    known = {
        "pyramid_levels",
        "window_radius",
        "max_iterations",
        "convergence_eps",
        "min_eigenvalue",
        "fb_error_max",
    }
    unknown = set(payload) - known
    if unknown:
        raise HTTPException(422, f"unknown tracking parameters: {sorted(unknown)}")
    merged = {k: getattr(base, k) for k in known}
    merged.update(payload)
    try:
        return TrackParams(**merged)
    except SliceTrackError as exc:
        raise HTTPException(422, str(exc)) from exc


def _detect_params_from(payload: dict | None) -> DetectParams | None:
    if not payload:
        return None
    known = {"threshold", "threshold_mode", "min_spacing", "max_keypoints"}
    unknown = set(payload) - known
    if unknown:
        raise HTTPException(422, f"unknown detection parameters: {sorted(unknown)}")
    try:
        return DetectParams(**payload)
    except SliceTrackError as exc:
        raise HTTPException(422, str(exc)) from exc


def _seed_spec_from(payload: dict) -> SeedSpec:
    mode = payload.get("mode")
    start = payload.get("start_slice", "center")
    try:
        if mode == "manual":
            points = payload.get("points")
            if not isinstance(points, list):
                raise HTTPException(422, "manual seeding needs a points list")
            try:
                pts = tuple((float(x), float(y)) for x, y in points)
            except (TypeError, ValueError):
                raise HTTPException(422, "points must be [x, y] pairs") from None
            return SeedSpec.manual(pts, start_slice=start)
        if mode == "auto":
            roi = payload.get("roi")
            if not isinstance(roi, dict):
                raise HTTPException(422, "auto seeding needs an roi object")
            try:
                r = Roi(
                    x0=int(roi["x0"]),
                    y0=int(roi["y0"]),
                    width=int(roi["width"]),
                    height=int(roi["height"]),
                )
            except (KeyError, TypeError, ValueError):
                raise HTTPException(422, "roi needs integer x0, y0, width, height") from None
            detect = _detect_params_from(payload.get("detect"))
            return SeedSpec.auto(r, detect=detect, start_slice=start)
        raise HTTPException(422, f"seed mode must be 'manual' or 'auto', got {mode!r}")
    except SliceTrackError as exc:
        raise HTTPException(422, str(exc)) from exc


def _params_payload(p: TrackParams) -> dict:
    return {
        "pyramid_levels": p.pyramid_levels,
        "window_radius": p.window_radius,
        "max_iterations": p.max_iterations,
        "convergence_eps": p.convergence_eps,
        "min_eigenvalue": p.min_eigenvalue,
        "fb_error_max": p.fb_error_max,
    }


def _keypoints_payload(points: KeypointSet) -> dict:
    return {
        "slice_index": points.slice_index,
        "keypoints": [
            {"x": p.x, "y": p.y, "status": p.status.value} for p in points.points
        ],
    }


def _session_payload(s: Session) -> dict:
    out = {
        "id": s.id,
        "volume": s.volume_name,
        "state": s.state,
        "params": _params_payload(s.params),
    }
    if s.seed_points is not None:
        out["start_slice"] = s.seed_points.slice_index
        out["n_keypoints"] = len(s.seed_points)
    if s.result is not None:
        out["stop_up"] = s.result.stop_up
        out["stop_down"] = s.result.stop_down
        out["n_masks"] = sum(
            1 for r in s.result.per_slice.values() if r.mask is not None
        )
    return out


def _truth_png(mask_bits: np.ndarray | None, height: int, width: int) -> bytes:
    # transparent everywhere except the annotated region, so the client
    # can composite it over any base image without touching pixels
    rgba = np.zeros((height, width, 4), dtype=np.uint8)
    if mask_bits is not None:
        rgba[mask_bits] = TRUTH_RGBA
    buf = BytesIO()
    Image.fromarray(rgba, mode="RGBA").save(buf, format="PNG")
    return buf.getvalue()


def _overlay_png(volume: Volume, result: SegmentationResult, index: int) -> bytes:
    gray = np.rint(volume.slices[index].pixels * 255.0).astype(np.float64)
    rgb = np.stack([gray, gray, gray], axis=-1)
    record = result.per_slice.get(index)
    if record is not None and record.mask is not None:
        sel = record.mask.bits
        for c in range(3):
            chan = rgb[..., c]
            chan[sel] = (1.0 - OVERLAY_ALPHA) * chan[sel] + OVERLAY_ALPHA * OVERLAY_RGB[c]
    buf = BytesIO()
    Image.fromarray(np.rint(rgb).astype(np.uint8), mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def create_app(volume_root: str | Path, ui_dir: str | Path | None = None) -> FastAPI:
    """Build the service around one volume root directory."""
    store = VolumeStore(volume_root)
    sessions: dict[str, Session] = {}
    sessions_lock = threading.Lock()

    app = FastAPI(title="slicetrack")

    def _session(session_id: str) -> Session:
        with sessions_lock:
            s = sessions.get(session_id)
        if s is None:
            raise HTTPException(404, f"unknown session {session_id!r}")
        return s

    def _tracked(session_id: str) -> Session:
        s = _session(session_id)
        if s.result is None:
            raise HTTPException(409, "session has no tracking result yet")
        return s

    @app.get("/volumes")
    def list_volumes() -> dict:
        return {
            "volumes": [
                {"name": n, "n_slices": store.slice_count(n)} for n in store.names()
            ]
        }

    @app.get("/volumes/{name}")
    def volume_detail(name: str) -> dict:
        vol = store.get(name)
        return {
            "name": name,
            "n_slices": len(vol),
            "width": vol.width,
            "height": vol.height,
            "source_ids": list(vol.source_ids),
            "has_annotations": store.annotation_dir(name) is not None,
        }

    @app.get("/volumes/{name}/slices/{index}")
    def volume_slice(name: str, index: int) -> Response:
        vol = store.get(name)
        if not (0 <= index < len(vol)):
            raise HTTPException(404, f"slice {index} outside volume of {len(vol)}")
        return Response(io.slice_png_bytes(vol.slices[index]), media_type="image/png")

    @app.get("/volumes/{name}/slices/{index}/truth")
    def volume_truth(name: str, index: int, label: str | None = None) -> Response:
        vol = store.get(name)
        if not (0 <= index < len(vol)):
            raise HTTPException(404, f"slice {index} outside volume of {len(vol)}")
        ann = store.annotation_dir(name)
        if ann is None:
            raise HTTPException(404, f"volume {name!r} has no annotations")
        try:
            truth = io.rasterize_annotations(
                ann, vol.source_ids, vol.height, vol.width, label=label
            )
        except (ValidationError, SliceTrackError) as exc:
            raise HTTPException(422, str(exc)) from exc
        mask = truth.get(index)
        blob = _truth_png(
            None if mask is None else mask.bits, vol.height, vol.width
        )
        return Response(blob, media_type="image/png")

    @app.post("/sessions", status_code=201)
    def create_session(payload: dict) -> dict:
        name = payload.get("volume")
        if not isinstance(name, str):
            raise HTTPException(422, "payload needs a volume name")
        vol = store.get(name)
        params = _track_params_from(payload.get("params"), TrackParams())
        s = Session(
            id=uuid.uuid4().hex, volume_name=name, volume=vol, params=params
        )
        with sessions_lock:
            sessions[s.id] = s
        return _session_payload(s)

    @app.get("/sessions/{session_id}")
    def session_detail(session_id: str) -> dict:
        return _session_payload(_session(session_id))

    @app.post("/sessions/{session_id}/seed")
    def set_seed(session_id: str, payload: dict) -> dict:
        s = _session(session_id)
        spec = _seed_spec_from(payload)
        with s.lock:
            try:
                found = pipeline.seed_keypoints(s.volume, spec)
            except SliceTrackError as exc:
                raise HTTPException(422, str(exc)) from exc
            # re-seeding drops any previous result: back to "seeded"
            s.seed = spec
            s.seed_points = found
            s.result = None
            return {**_session_payload(s), **_keypoints_payload(found)}

    @app.post("/sessions/{session_id}/track")
    def run_track(session_id: str, payload: dict | None = None) -> dict:
        s = _session(session_id)
        with s.lock:
            if s.seed is None:
                raise HTTPException(409, "session is awaiting a seed")
            params = _track_params_from(
                (payload or {}).get("params"), s.params
            )
            try:
                result = pipeline.propagate(
                    s.volume, s.seed_points, params, seed=s.seed
                )
            except SliceTrackError as exc:
                raise HTTPException(422, str(exc)) from exc
            s.params = params
            s.result = result
            return _session_payload(s)

    @app.get("/sessions/{session_id}/slices/{index}/keypoints")
    def slice_keypoints(session_id: str, index: int) -> dict:
        s = _session(session_id)
        if s.result is not None:
            record = s.result.per_slice.get(index)
            if record is None:
                raise HTTPException(404, f"no keypoints on slice {index}")
            payload = _keypoints_payload(record.keypoints)
            payload["hull"] = (
                None
                if record.hull is None
                else [[x, y] for x, y in record.hull.vertices]
            )
            return payload
        if s.seed_points is not None and index == s.seed_points.slice_index:
            return {**_keypoints_payload(s.seed_points), "hull": None}
        raise HTTPException(409, "session has no tracking result yet")

    @app.get("/sessions/{session_id}/slices/{index}/hull")
    def slice_hull(session_id: str, index: int) -> dict:
        s = _tracked(session_id)
        record = s.result.per_slice.get(index)
        if record is None:
            raise HTTPException(404, f"no record for slice {index}")
        return {
            "slice_index": index,
            "hull": None
            if record.hull is None
            else [[x, y] for x, y in record.hull.vertices],
        }

    @app.get("/sessions/{session_id}/slices/{index}/mask")
    def slice_mask(session_id: str, index: int) -> Response:
        s = _tracked(session_id)
        record = s.result.per_slice.get(index)
        if record is None or record.mask is None:
            raise HTTPException(404, f"no mask for slice {index}")
        return Response(io.mask_png_bytes(record.mask), media_type="image/png")

    @app.get("/sessions/{session_id}/slices/{index}/overlay")
    def slice_overlay(session_id: str, index: int) -> Response:
        s = _tracked(session_id)
        if not (0 <= index < len(s.volume)):
            raise HTTPException(404, f"slice {index} outside volume of {len(s.volume)}")
        return Response(
            _overlay_png(s.volume, s.result, index), media_type="image/png"
        )

    @app.get("/sessions/{session_id}/metrics")
    def session_metrics(session_id: str, label: str | None = None) -> dict:
        s = _tracked(session_id)
        ann = store.annotation_dir(s.volume_name)
        if ann is None:
            raise HTTPException(404, f"volume {s.volume_name!r} has no annotations")
        try:
            truth = io.rasterize_annotations(
                ann, s.volume.source_ids, s.volume.height, s.volume.width, label=label
            )
            report = pipeline.evaluate(s.result, truth)
        except (ValidationError, SliceTrackError) as exc:
            raise HTTPException(422, str(exc)) from exc
        return {
            "per_slice": {str(i): v for i, v in sorted(report.per_slice_dsc.items())},
            "mean": report.mean,
            "std": report.std,
            "median": report.median,
            "iqr_low": report.iqr_low,
            "iqr_high": report.iqr_high,
            "n_evaluated": report.n_evaluated,
            "n_zero": report.n_zero,
        }

    if ui_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
