"""Volume/annotation ingestion and result serialization.

Volumes are directories of same-sized grayscale images, one per slice,
ordered by filename. Annotations are a minimal LabelMe-compatible JSON
subset (imagePath + polygon shapes). Results are written as flat files:
mask images, a JSON manifest, delimited metrics, and a raw voxel blob
with a JSON sidecar. All writers are deterministic for identical inputs
(no timestamps, sorted keys), so reruns are byte-comparable.
"""

from __future__ import annotations

import json
import re
import warnings
from io import BytesIO
from pathlib import Path

import numpy as np
from PIL import Image

from . import geometry, pipeline
from .core import GraySlice, SliceMask, Volume, normalize_intensities
from .errors import IngestError, ValidationError
from .geometry import Polygon

_GRAY_MAX = {"L": 255, "I": 65535, "I;16": 65535, "I;16B": 65535, "I;16L": 65535}

MASK_DIR = "masks"
MANIFEST_NAME = "manifest.json"
METRICS_NAME = "metrics.csv"
SUMMARY_NAME = "metrics_summary.csv"
VOLUME_NAME = "volume.raw"
VOLUME_META_NAME = "volume_meta.json"


def _numeric_key(name: str):
    # "s10.png" -> ("s", 10, ".png"): digit runs compare as integers
    parts = re.split(r"(\d+)", name)
    return tuple(int(p) if p.isdigit() else p for p in parts)


def load_slice_image(path: str | Path, strict: bool = False) -> GraySlice:
    """Read one image file as a slice with intensities in [0, 1].

    8-bit grayscale divides by 255, 16-bit by 65535. Color inputs are
    reduced to luminance with a warning, or rejected when strict.
    """
    path = Path(path)
    try:
        img = Image.open(path)
        img.load()
    except (OSError, ValueError) as exc:
        raise IngestError(f"cannot read image {path}: {exc}") from exc
    if img.mode not in _GRAY_MAX:
        if strict:
            raise IngestError(f"{path}: mode {img.mode} is not grayscale")
        warnings.warn(f"{path.name}: converting {img.mode} to luminance", stacklevel=2)
        img = img.convert("L")
    raw = np.asarray(img, dtype=np.float64)
    if raw.ndim != 2:
        raise IngestError(f"{path}: expected a single-channel image, got shape {raw.shape}")
    return normalize_intensities(raw, _GRAY_MAX[img.mode])


def load_volume(
    directory: str | Path,
    pattern: str = "*.png",
    numeric_sort: bool = False,
    strict: bool = False,
    slice_spacing_mm: float = 1.0,
) -> Volume:
    """Load every image matching pattern as one slice of a Volume.

    Filenames sort lexicographically by default; numeric_sort compares
    embedded digit runs as integers (s2 before s10). source_ids are the
    bare filenames.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise IngestError(f"volume directory not found: {directory}")
    names = sorted(
        (p.name for p in directory.glob(pattern) if p.is_file()),
        key=_numeric_key if numeric_sort else None,
    )
    if not names:
        raise IngestError(f"no files matching {pattern!r} in {directory}")

    slices = []
    shapes: dict[tuple[int, int], list[str]] = {}
    for name in names:
        sl = load_slice_image(directory / name, strict=strict)
        shapes.setdefault((sl.height, sl.width), []).append(name)
        slices.append(sl)
    if len(shapes) > 1:
        detail = "; ".join(
            f"{h}x{w}: {', '.join(members)}" for (h, w), members in sorted(shapes.items())
        )
        raise IngestError(f"mixed slice dimensions in {directory}: {detail}")

    return Volume(
        slices=tuple(slices),
        slice_spacing_mm=slice_spacing_mm,
        source_ids=tuple(names),
    )


def _oriented(points: list[tuple[float, float]]) -> Polygon:
    # drop a closing vertex that repeats the first, then force positive area
    if len(points) > 3 and points[0] == points[-1]:
        points = points[:-1]
    poly = Polygon(tuple(points))
    if poly.area() < 0.0:
        poly = Polygon(tuple(reversed(poly.vertices)))
    return poly


def _parse_annotation(path: Path) -> tuple[str, list[tuple[str, Polygon]]]:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise IngestError(f"cannot parse annotation {path}: {exc}") from exc
    image_path = doc.get("imagePath")
    if not isinstance(image_path, str) or not image_path:
        raise IngestError(f"{path}: missing imagePath")
    shapes = doc.get("shapes", [])
    polygons: list[tuple[str, Polygon]] = []
    for shape in shapes:
        if shape.get("shape_type", "polygon") != "polygon":
            continue
        points = [(float(x), float(y)) for x, y in shape.get("points", [])]
        if len(points) < 3:
            raise IngestError(f"{path}: polygon with fewer than 3 vertices")
        polygons.append((str(shape.get("label", "")), _oriented(points)))
    return Path(image_path).name, polygons


def rasterize_annotations(
    directory: str | Path,
    source_ids: tuple[str, ...],
    height: int,
    width: int,
    label: str | None = None,
) -> dict[int, SliceMask]:
    """Rasterize annotation polygons into per-slice ground-truth masks.

    Each annotation names its slice via imagePath, resolved against
    source_ids (extension-insensitive fallback). Multiple polygons on one
    slice are unioned. A label filter that matches no polygon yields an
    empty map with a warning.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise IngestError(f"annotation directory not found: {directory}")

    by_name = {sid: i for i, sid in enumerate(source_ids)}
    by_stem = {Path(sid).stem: i for i, sid in enumerate(source_ids)}

    masks: dict[int, np.ndarray] = {}
    matched = 0
    files = sorted(directory.glob("*.json"))
    if not files:
        raise IngestError(f"no annotation files in {directory}")
    for path in files:
        slice_id, polygons = _parse_annotation(path)
        index = by_name.get(slice_id, by_stem.get(Path(slice_id).stem))
        if index is None:
            raise IngestError(f"{path.name}: slice id {slice_id!r} not in volume")
        for poly_label, poly in polygons:
            if label is not None and poly_label != label:
                continue
            matched += 1
            bits = geometry.rasterize(poly, width, height).bits
            if index in masks:
                masks[index] = masks[index] | bits
            else:
                masks[index] = bits
    if label is not None and matched == 0:
        warnings.warn(f"label {label!r} matched no polygons in {directory}", stacklevel=2)
    return {i: SliceMask(bits) for i, bits in sorted(masks.items())}


def load_annotations(
    directory: str | Path,
    volume: Volume,
    label: str | None = None,
) -> dict[int, SliceMask]:
    """rasterize_annotations resolved against a loaded volume."""
    return rasterize_annotations(
        directory, volume.source_ids, volume.height, volume.width, label=label
    )


def _mask_name(index: int) -> str:
    return f"mask_{index:04d}.png"


def mask_png_bytes(mask: SliceMask) -> bytes:
    """Encode a mask as an 8-bit PNG, foreground 255."""
    arr = np.where(mask.bits, 255, 0).astype(np.uint8)
    buf = BytesIO()
    Image.fromarray(arr, mode="L").save(buf, format="PNG")
    return buf.getvalue()


def slice_png_bytes(sl: GraySlice) -> bytes:
    """Encode a slice as an 8-bit grayscale PNG."""
    arr = np.rint(sl.pixels * 255.0).astype(np.uint8)
    buf = BytesIO()
    Image.fromarray(arr, mode="L").save(buf, format="PNG")
    return buf.getvalue()


def save_mask(mask: SliceMask, path: str | Path) -> None:
    """Write a mask as an 8-bit image, foreground 255."""
    _write_bytes(Path(path), mask_png_bytes(mask))


def load_mask(path: str | Path) -> SliceMask:
    """Read a saved mask image; any nonzero pixel is foreground."""
    arr = np.asarray(Image.open(path).convert("L"))
    return SliceMask(arr > 0)


def load_masks(directory: str | Path) -> dict[int, SliceMask]:
    """Read all mask_NNNN.png files from a result's masks directory."""
    directory = Path(directory)
    mask_dir = directory / MASK_DIR if (directory / MASK_DIR).is_dir() else directory
    out: dict[int, SliceMask] = {}
    for path in sorted(mask_dir.glob("mask_*.png")):
        m = re.fullmatch(r"mask_(\d+)\.png", path.name)
        if m is None:
            continue
        out[int(m.group(1))] = load_mask(path)
    if not out:
        raise IngestError(f"no mask images under {directory}")
    return out


def _seed_payload(seed: pipeline.SeedSpec | None) -> dict | None:
    if seed is None:
        return None
    payload: dict = {"mode": seed.mode, "start_slice": seed.start_slice}
    if seed.points is not None:
        payload["points"] = [[x, y] for x, y in seed.points]
    if seed.roi is not None:
        r = seed.roi
        payload["roi"] = {"x0": r.x0, "y0": r.y0, "width": r.width, "height": r.height}
    if seed.detect is not None:
        d = seed.detect
        payload["detect"] = {
            "threshold": d.threshold,
            "threshold_mode": d.threshold_mode,
            "min_spacing": d.min_spacing,
            "max_keypoints": d.max_keypoints,
        }
    return payload


def save_result(
    result: pipeline.SegmentationResult,
    out_dir: str | Path,
    report: pipeline.MetricsReport | None = None,
    in_plane_mm: float = 1.0,
    spacing_mm: float = 1.0,
    source_ids: tuple[str, ...] | None = None,
) -> Path:
    """Write masks, manifest, optional metrics, and the voxel blob.

    Layout under out_dir: masks/mask_NNNN.png (only slices that have a
    mask), manifest.json (seed, params, stops, per-slice keypoint
    trajectories, and the volume's source_ids when given), metrics.csv +
    metrics_summary.csv when a report is given, and volume.raw (z-major
    0/1 bytes) + volume_meta.json when at least one mask exists. Returns
    out_dir.
    """
    out_dir = Path(out_dir)
    mask_dir = out_dir / MASK_DIR
    _ensure_dir(mask_dir)

    slices_payload: dict[str, dict] = {}
    n_masks = 0
    for index in sorted(result.per_slice):
        record = result.per_slice[index]
        mask_file = None
        if record.mask is not None:
            mask_file = f"{MASK_DIR}/{_mask_name(index)}"
            save_mask(record.mask, out_dir / MASK_DIR / _mask_name(index))
            n_masks += 1
        slices_payload[str(index)] = {
            "keypoints": [
                {"x": p.x, "y": p.y, "status": p.status.value}
                for p in record.keypoints.points
            ],
            "hull": None
            if record.hull is None
            else [[x, y] for x, y in record.hull.vertices],
            "mask": mask_file,
        }

    p = result.params
    manifest = {
        "seed": _seed_payload(result.seed),
        "params": {
            "pyramid_levels": p.pyramid_levels,
            "window_radius": p.window_radius,
            "max_iterations": p.max_iterations,
            "convergence_eps": p.convergence_eps,
            "min_eigenvalue": p.min_eigenvalue,
            "fb_error_max": p.fb_error_max,
        },
        "stop_up": result.stop_up,
        "stop_down": result.stop_down,
        "n_slices": result.n_slices,
        "slice_shape": list(result.slice_shape),
        "source_ids": None if source_ids is None else list(source_ids),
        "slices": slices_payload,
    }
    _write_text(out_dir / MANIFEST_NAME, json.dumps(manifest, indent=2, sort_keys=True) + "\n")

    if report is not None:
        lines = ["slice_index,dsc"]
        lines += [f"{i},{v!r}" for i, v in sorted(report.per_slice_dsc.items())]
        _write_text(out_dir / METRICS_NAME, "\n".join(lines) + "\n")
        summary = [
            "mean,std,median,iqr_low,iqr_high,n_evaluated,n_zero",
            f"{report.mean!r},{report.std!r},{report.median!r},"
            f"{report.iqr_low!r},{report.iqr_high!r},"
            f"{report.n_evaluated},{report.n_zero}",
        ]
        _write_text(out_dir / SUMMARY_NAME, "\n".join(summary) + "\n")

    if n_masks > 0:
        voxels = pipeline.reconstruct(result, in_plane_mm=in_plane_mm, spacing_mm=spacing_mm)
        save_voxels(voxels, out_dir)
    return out_dir


def _write_text(path: Path, text: str) -> None:
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise IngestError(f"cannot write {path}: {exc}") from exc


def _write_bytes(path: Path, blob: bytes) -> None:
    try:
        path.write_bytes(blob)
    except OSError as exc:
        raise IngestError(f"cannot write {path}: {exc}") from exc


def _ensure_dir(path: Path) -> None:
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IngestError(f"cannot create output directory {path}: {exc}") from exc


def load_manifest(result_dir: str | Path) -> dict:
    """Read a saved run's manifest.json."""
    path = Path(result_dir) / MANIFEST_NAME
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise IngestError(f"cannot read manifest {path}: {exc}") from exc


def read_seed_file(path: str | Path) -> tuple[int | str, tuple[tuple[float, float], ...]]:
    """Parse a manual-seed file.

    First non-comment line is "start_slice <int|center>"; every following
    line is one "x y" pair. Returns (start_slice, points).
    """
    path = Path(path)
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IngestError(f"cannot read seed file {path}: {exc}") from exc
    lines = [ln.strip() for ln in raw.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise IngestError(f"{path}: empty seed file")
    header = lines[0].split()
    if len(header) != 2 or header[0] != "start_slice":
        raise IngestError(f"{path}: first line must be 'start_slice <int|center>'")
    start: int | str
    if header[1] == "center":
        start = "center"
    else:
        try:
            start = int(header[1])
        except ValueError as exc:
            raise IngestError(f"{path}: bad start slice {header[1]!r}") from exc
    points = []
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 2:
            raise IngestError(f"{path}: bad seed line {ln!r}")
        try:
            points.append((float(parts[0]), float(parts[1])))
        except ValueError as exc:
            raise IngestError(f"{path}: bad seed line {ln!r}") from exc
    if not points:
        raise IngestError(f"{path}: no seed points")
    return start, tuple(points)


def save_voxels(voxels: pipeline.VoxelVolume, out_dir: str | Path) -> Path:
    """Write a voxel volume alone (raw blob + sidecar) into out_dir."""
    out_dir = Path(out_dir)
    _ensure_dir(out_dir)
    _write_bytes(
        out_dir / VOLUME_NAME,
        np.ascontiguousarray(voxels.bits, dtype=np.uint8).tobytes(),
    )
    meta = {
        "dims": list(voxels.dims),
        "spacing_mm": list(voxels.spacing_mm),
        "order": "z-major, then row-major per plane",
        "voxel_bytes": 1,
        "values": [0, 1],
        "foreground_count": voxels.count,
    }
    _write_text(out_dir / VOLUME_META_NAME, json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return out_dir
