"""End-to-end orchestration: seeding, bidirectional propagation, hull/mask
generation per slice, evaluation against ground truth, and voxel stacking.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import flow, geometry, wavelet
from .core import (
    GraySlice,
    Keypoint,
    KeypointSet,
    Roi,
    SliceMask,
    TrackParams,
    Volume,
    crop,
)
from .errors import DegenerateHullError, SeedError, ValidationError
from .geometry import Polygon
from .wavelet import DetectParams

MIN_HULL_POINTS = 3


@dataclass(frozen=True)
class SeedSpec:
    """How Phase 1 picks keypoints: hand-placed points, or wavelet detection
    inside an ROI. start_slice "center" resolves to floor(slice_count / 2).
    """

    mode: str  # "manual" | "auto"
    points: tuple[tuple[float, float], ...] | None = None
    roi: Roi | None = None
    detect: DetectParams | None = None
    start_slice: int | str = "center"

    def __post_init__(self):
        if self.mode == "manual":
            if self.points is None or len(self.points) < MIN_HULL_POINTS:
                raise SeedError(
                    f"manual seeding needs at least {MIN_HULL_POINTS} points"
                )
            object.__setattr__(
                self,
                "points",
                tuple((float(x), float(y)) for x, y in self.points),
            )
        elif self.mode == "auto":
            if self.roi is None:
                raise SeedError("auto seeding needs an ROI")
        else:
            raise ValidationError(f"unknown seed mode {self.mode!r}")
        if isinstance(self.start_slice, str) and self.start_slice != "center":
            raise ValidationError("start_slice must be an index or 'center'")

    @classmethod
    def manual(cls, points, start_slice: int | str = "center") -> "SeedSpec":
        return cls(mode="manual", points=tuple(points), start_slice=start_slice)

    @classmethod
    def auto(
        cls,
        roi: Roi,
        detect: DetectParams | None = None,
        start_slice: int | str = "center",
    ) -> "SeedSpec":
        return cls(mode="auto", roi=roi, detect=detect, start_slice=start_slice)

    def resolve_start(self, slice_count: int) -> int:
        idx = (
            slice_count // 2
            if self.start_slice == "center"
            else int(self.start_slice)
        )
        if not (0 <= idx < slice_count):
            raise ValidationError(
                f"start slice {idx} outside volume of {slice_count} slices"
            )
        return idx


@dataclass(frozen=True, eq=False)
class SliceRecord:
    """Per-slice products of propagation: the keypoints, and the hull/mask
    when at least 3 live non-collinear points exist on the slice.
    """

    keypoints: KeypointSet
    hull: Polygon | None = None
    mask: SliceMask | None = None


@dataclass(frozen=True, eq=False)
class SegmentationResult:
    """Per-slice records over the contiguous index range [stop_up, stop_down]
    plus the provenance needed to reproduce them.
    """

    per_slice: dict[int, SliceRecord]
    seed: SeedSpec
    params: TrackParams
    stop_up: int
    stop_down: int
    slice_shape: tuple[int, int]  # (height, width)
    n_slices: int

    def mask_or_empty(self, index: int) -> SliceMask:
        rec = self.per_slice.get(index)
        if rec is not None and rec.mask is not None:
            return rec.mask
        return SliceMask(np.zeros(self.slice_shape, dtype=bool))


@dataclass(frozen=True)
class MetricsReport:
    per_slice_dsc: dict[int, float]
    mean: float
    std: float
    median: float
    iqr_low: float
    iqr_high: float
    n_evaluated: int
    n_zero: int


@dataclass(frozen=True, eq=False)
class VoxelVolume:
    """Boolean voxel grid; bits has shape (nz, ny, nx), so flattening it is
    z-major, then row-major per plane.
    """

    dims: tuple[int, int, int]  # (nx, ny, nz)
    spacing_mm: tuple[float, float, float]
    bits: np.ndarray

    def __post_init__(self):
        nx, ny, nz = self.dims
        if self.bits.shape != (nz, ny, nx):
            raise ValidationError(
                f"voxel bits shape {self.bits.shape} does not match dims {self.dims}"
            )

    @property
    def count(self) -> int:
        return int(self.bits.sum())


def seed_keypoints(volume: Volume, seed: SeedSpec) -> KeypointSet:
    """Run Phase 1 on the start slice and return live keypoints."""
    start = seed.resolve_start(len(volume))
    sl = volume.slices[start]

    if seed.mode == "manual":
        for x, y in seed.points:
            if not (0.0 <= x < sl.width and 0.0 <= y < sl.height):
                raise SeedError(
                    f"seed point ({x}, {y}) outside the {sl.width}x{sl.height} slice"
                )
        pts = tuple(Keypoint(x=x, y=y) for x, y in seed.points)
        return KeypointSet(slice_index=start, points=pts)

    detect = seed.detect if seed.detect is not None else DetectParams()
    roi_img = crop(sl, seed.roi)
    subbands = wavelet.haar_dwt2(roi_img, roi=seed.roi)
    mag = wavelet.magnitude(subbands)
    found = wavelet.detect_keypoints(mag, detect, slice_index=start)
    if len(found) < MIN_HULL_POINTS:
        raise SeedError(
            f"automatic detection found only {len(found)} keypoints; lower the "
            f"threshold or enlarge the ROI"
        )
    return found


def _make_record(points: KeypointSet, shape: tuple[int, int]) -> SliceRecord:
    live = points.live_points()
    if len(live) < MIN_HULL_POINTS:
        return SliceRecord(keypoints=points)
    try:
        hull = geometry.convex_hull([(p.x, p.y) for p in live])
    except DegenerateHullError:
        return SliceRecord(keypoints=points)
    mask = geometry.rasterize(hull, width=shape[1], height=shape[0])
    return SliceRecord(keypoints=points, hull=hull, mask=mask)


def propagate(
    volume: Volume,
    initial: KeypointSet,
    params: TrackParams | None = None,
    seed: SeedSpec | None = None,
) -> SegmentationResult:
    """Track the seeds outward from their slice in both directions.

    Each direction is an independent sequential chain over adjacent slices.
    A chain halts after the slice where fewer than 3 points remain live; the
    reached extremes are recorded as stop_up (lowest index) and stop_down
    (highest). Slices with at least 3 live, non-collinear points get a hull
    and a rasterized mask. seed is provenance only; when omitted, a manual
    SeedSpec equivalent to the initial points is recorded.
    """
    if params is None:
        params = TrackParams()
    n = len(volume)
    if not (0 <= initial.slice_index < n):
        raise ValidationError(
            f"seed slice {initial.slice_index} outside volume of {n} slices"
        )
    shape = (volume.height, volume.width)
    start = initial.slice_index
    if seed is None:
        seed = SeedSpec.manual(
            tuple((p.x, p.y) for p in initial.points), start_slice=start
        )

    records: dict[int, SliceRecord] = {start: _make_record(initial, shape)}
    stops: dict[str, int] = {}

    for label, step in (("down", 1), ("up", -1)):
        current = initial
        pyr = flow.build_pyramid(volume.slices[start], params.pyramid_levels)
        stop = start
        j = start + step
        while 0 <= j < n and current.live_count >= MIN_HULL_POINTS:
            next_pyr = flow.build_pyramid(volume.slices[j], params.pyramid_levels)
            current = flow.track_set_pyramids(pyr, next_pyr, current, params, j)
            records[j] = _make_record(current, shape)
            stop = j
            pyr = next_pyr
            j += step
        stops[label] = stop

    return SegmentationResult(
        per_slice=records,
        seed=seed,
        params=params,
        stop_up=stops["up"],
        stop_down=stops["down"],
        slice_shape=shape,
        n_slices=n,
    )


def segment(
    volume: Volume, seed: SeedSpec, params: TrackParams | None = None
) -> SegmentationResult:
    """Seed then propagate, recording the SeedSpec as provenance."""
    initial = seed_keypoints(volume, seed)
    return propagate(volume, initial, params, seed=seed)


def evaluate_masks(
    predicted: dict[int, SliceMask],
    truth: dict[int, SliceMask],
    slice_shape: tuple[int, int],
    include_empty_truth: bool = False,
) -> MetricsReport:
    """Per-slice Dice of predicted masks against ground truth.

    Slices whose ground truth is empty are skipped unless include_empty_truth
    is set. An absent prediction counts as an empty mask. Quartiles use
    linear interpolation; std is the population standard deviation.
    """
    chosen = [
        i
        for i in sorted(truth)
        if include_empty_truth or truth[i].count > 0
    ]
    if not chosen:
        raise ValidationError(
            "nothing to evaluate: no annotated slices"
            + ("" if include_empty_truth else " with nonempty ground truth")
        )
    empty = SliceMask(np.zeros(slice_shape, dtype=bool))
    per = {
        i: geometry.dsc(predicted.get(i, empty), truth[i]) for i in chosen
    }
    vals = np.array([per[i] for i in chosen], dtype=np.float64)
    q25, q50, q75 = np.quantile(vals, [0.25, 0.5, 0.75])
    return MetricsReport(
        per_slice_dsc=per,
        mean=float(vals.mean()),
        std=float(vals.std()),
        median=float(q50),
        iqr_low=float(q25),
        iqr_high=float(q75),
        n_evaluated=len(chosen),
        n_zero=int((vals == 0.0).sum()),
    )


def evaluate(
    result: SegmentationResult,
    truth: dict[int, SliceMask],
    include_empty_truth: bool = False,
) -> MetricsReport:
    """evaluate_masks over the masks a segmentation run produced."""
    predicted = {
        i: rec.mask
        for i, rec in result.per_slice.items()
        if rec.mask is not None
    }
    return evaluate_masks(
        predicted, truth, result.slice_shape, include_empty_truth
    )


def reconstruct_masks(
    masks: dict[int, SliceMask],
    slice_shape: tuple[int, int],
    n_slices: int,
    in_plane_mm: float = 1.0,
    spacing_mm: float = 1.0,
) -> VoxelVolume:
    """Stack per-slice masks into a voxel grid of n_slices planes.

    Slice indices without a mask contribute empty planes.
    """
    if not masks:
        raise ValidationError("no masks to reconstruct")
    h, w = slice_shape
    if not all(0 <= i < n_slices for i in masks):
        raise ValidationError("mask index outside the volume")
    bits = np.zeros((n_slices, h, w), dtype=bool)
    for i, mask in masks.items():
        bits[i] = mask.bits
    return VoxelVolume(
        dims=(w, h, n_slices),
        spacing_mm=(float(in_plane_mm), float(in_plane_mm), float(spacing_mm)),
        bits=bits,
    )


def reconstruct(
    result: SegmentationResult,
    in_plane_mm: float = 1.0,
    spacing_mm: float = 1.0,
) -> VoxelVolume:
    """Stack a segmentation run's masks into a voxel grid spanning the
    whole volume, empty planes where propagation produced no mask.
    """
    masks = {
        i: rec.mask
        for i, rec in result.per_slice.items()
        if rec.mask is not None
    }
    return reconstruct_masks(
        masks,
        result.slice_shape,
        result.n_slices,
        in_plane_mm=in_plane_mm,
        spacing_mm=spacing_mm,
    )
