"""Automatic keypoint detection: single-level 2D Haar decomposition of an ROI,
a detail-magnitude map, thresholding, and rescaling back to slice coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import GraySlice, Keypoint, KeypointSet, Roi
from .errors import ValidationError


@dataclass(frozen=True, eq=False)
class SubbandSet:
    """Approximation (a) plus horizontal/vertical/diagonal detail grids.

    Each grid has one cell per 2x2 block of the (edge-padded) input.
    """

    a: np.ndarray
    h: np.ndarray
    v: np.ndarray
    d: np.ndarray
    roi: Roi | None = None

    def __post_init__(self):
        shapes = {self.a.shape, self.h.shape, self.v.shape, self.d.shape}
        if len(shapes) != 1:
            raise ValidationError(f"subband grids differ in shape: {shapes}")


@dataclass(frozen=True, eq=False)
class MagnitudeMap:
    """Per-cell sum of absolute detail values; high cells mark structure edges."""

    m: np.ndarray
    roi: Roi | None = None

    def __post_init__(self):
        if (self.m < 0).any():
            raise ValidationError("magnitude values must be non-negative")


@dataclass(frozen=True)
class DetectParams:
    """Thresholding and pruning knobs for automatic keypoint detection.

    threshold_mode "quantile" resolves the cut as the q-quantile of the whole
    magnitude map (robust to contrast differences between volumes);
    "absolute" uses the value directly. min_spacing is measured in slice
    pixels; max_keypoints of None means unlimited.
    """

    threshold: float = 0.95
    threshold_mode: str = "quantile"
    min_spacing: float = 4.0
    max_keypoints: int | None = 64

    def __post_init__(self):
        if self.threshold_mode not in ("quantile", "absolute"):
            raise ValidationError(
                f"unknown threshold_mode {self.threshold_mode!r}"
            )
        if self.threshold_mode == "quantile" and not (0.0 < self.threshold < 1.0):
            raise ValidationError("quantile threshold must lie in (0, 1)")
        if self.threshold_mode == "absolute" and self.threshold < 0:
            raise ValidationError("absolute threshold must be >= 0")
        if self.min_spacing < 0:
            raise ValidationError("min_spacing must be >= 0")
        if self.max_keypoints is not None and self.max_keypoints < 1:
            raise ValidationError("max_keypoints must be >= 1 (or None)")


def haar_dwt2(roi_image: GraySlice, roi: Roi | None = None) -> SubbandSet:
    """Single-level 2D Haar transform, orthonormal per 2x2 block.

    For each block [[p00, p01], [p10, p11]] (first index = row):
        a = (p00 + p01 + p10 + p11) / 2
        h = (p00 + p01 - p10 - p11) / 2
        v = (p00 - p01 + p10 - p11) / 2
        d = (p00 - p01 - p10 + p11) / 2
    Odd dimensions are edge-replicated to even before the transform, so the
    grids are ceil(width/2) x ceil(height/2).
    """
    img = roi_image.pixels
    if img.shape[0] < 2 or img.shape[1] < 2:
        raise ValidationError(
            f"image must be at least 2x2 for the block transform, got "
            f"{img.shape[1]}x{img.shape[0]}"
        )
    pad_y = img.shape[0] % 2
    pad_x = img.shape[1] % 2
    if pad_y or pad_x:
        img = np.pad(img, ((0, pad_y), (0, pad_x)), mode="edge")

    p00 = img[0::2, 0::2]
    p01 = img[0::2, 1::2]
    p10 = img[1::2, 0::2]
    p11 = img[1::2, 1::2]
    a = (p00 + p01 + p10 + p11) / 2.0
    h = (p00 + p01 - p10 - p11) / 2.0
    v = (p00 - p01 + p10 - p11) / 2.0
    d = (p00 - p01 - p10 + p11) / 2.0
    return SubbandSet(a=a, h=h, v=v, d=d, roi=roi)


def inverse_haar_dwt2(subbands: SubbandSet) -> np.ndarray:
    """Invert the block transform, recovering the (padded) input exactly."""
    a, h, v, d = subbands.a, subbands.h, subbands.v, subbands.d
    out = np.empty((a.shape[0] * 2, a.shape[1] * 2), dtype=np.float64)
    out[0::2, 0::2] = (a + h + v + d) / 2.0
    out[0::2, 1::2] = (a + h - v - d) / 2.0
    out[1::2, 0::2] = (a - h + v - d) / 2.0
    out[1::2, 1::2] = (a - h - v + d) / 2.0
    return out


def magnitude(subbands: SubbandSet) -> MagnitudeMap:
    """Pointwise |h| + |v| + |d|."""
    m = np.abs(subbands.h) + np.abs(subbands.v) + np.abs(subbands.d)
    return MagnitudeMap(m=m, roi=subbands.roi)


def resolve_threshold(map_values: np.ndarray, params: DetectParams) -> float:
    if params.threshold_mode == "absolute":
        return float(params.threshold)
    return float(np.quantile(map_values, params.threshold))


def detect_keypoints(
    mag: MagnitudeMap, params: DetectParams, slice_index: int = 0
) -> KeypointSet:
    """Pick magnitude peaks and map them back to slice coordinates.

    Cells with magnitude strictly above the resolved threshold become
    candidates, ordered by descending magnitude (ties broken by cell row,
    then column). Greedy suppression drops any candidate closer than
    min_spacing (Euclidean, slice pixels) to an already accepted one, and at
    most max_keypoints are kept. Cell (cx, cy) maps to the center of its 2x2
    block: (roi.x0 + 2*cx + 0.5, roi.y0 + 2*cy + 0.5).
    """
    m = mag.m
    if m.size == 0:
        raise ValidationError("magnitude map is empty")
    x0 = mag.roi.x0 if mag.roi is not None else 0
    y0 = mag.roi.y0 if mag.roi is not None else 0

    t = resolve_threshold(m, params)
    rows, cols = np.nonzero(m > t)
    if rows.size == 0:
        return KeypointSet(slice_index=slice_index, points=())
    vals = m[rows, cols]
    order = np.lexsort((cols, rows, -vals))

    cap = params.max_keypoints if params.max_keypoints is not None else rows.size
    accepted: list[tuple[float, float]] = []
    for idx in order:
        if len(accepted) >= cap:
            break
        sx = x0 + 2.0 * cols[idx] + 0.5
        sy = y0 + 2.0 * rows[idx] + 0.5
        if all(
            (sx - ax) ** 2 + (sy - ay) ** 2 >= params.min_spacing**2
            for ax, ay in accepted
        ):
            accepted.append((sx, sy))

    points = tuple(Keypoint(x=sx, y=sy) for sx, sy in accepted)
    return KeypointSet(slice_index=slice_index, points=points)
