"""Value-semantic domain types: slices, volumes, ROIs, keypoints, masks, parameters.

All types are immutable after construction (arrays are marked read-only), so
they can be shared freely across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import BoundsError, ConfigError, ValidationError


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True, eq=False)
class GraySlice:
    """One grayscale slice, intensities normalized to [0, 1].

    pixels is row-major with shape (height, width), dtype float64.
    """

    pixels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.pixels, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValidationError(f"slice must be a 2D array, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValidationError("slice intensities must be finite")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValidationError(
                f"slice intensities must lie in [0, 1], got range "
                f"[{arr.min():.6g}, {arr.max():.6g}]"
            )
        object.__setattr__(self, "pixels", _freeze(arr))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True, eq=False)
class Volume:
    """Ordered stack of same-sized slices. Index 0 is the first file on disk."""

    slices: tuple[GraySlice, ...]
    slice_spacing_mm: float = 1.0
    source_ids: tuple[str, ...] = ()

    def __post_init__(self):
        slices = tuple(self.slices)
        if len(slices) < 1:
            raise ValidationError("volume needs at least one slice")
        w, h = slices[0].width, slices[0].height
        bad = [i for i, s in enumerate(slices) if (s.width, s.height) != (w, h)]
        if bad:
            raise ValidationError(
                f"slices {bad} do not match the {w}x{h} dimensions of slice 0"
            )
        if self.slice_spacing_mm <= 0:
            raise ValidationError("slice_spacing_mm must be positive")
        ids = tuple(self.source_ids)
        if not ids:
            ids = tuple(f"{i:04d}" for i in range(len(slices)))
        elif len(ids) != len(slices):
            raise ValidationError("source_ids length must match slice count")
        object.__setattr__(self, "slices", slices)
        object.__setattr__(self, "source_ids", ids)

    def __len__(self) -> int:
        return len(self.slices)

    @property
    def width(self) -> int:
        return self.slices[0].width

    @property
    def height(self) -> int:
        return self.slices[0].height


@dataclass(frozen=True)
class Roi:
    """Axis-aligned rectangle in pixel coordinates; (x0, y0) is the top-left corner.

    Even width/height are recommended: odd ROI dimensions get edge-replicated
    by the wavelet decomposition.
    """

    x0: int
    y0: int
    width: int
    height: int

    def __post_init__(self):
        if self.x0 < 0 or self.y0 < 0:
            raise ValidationError("ROI origin must be non-negative")
        if self.width < 2 or self.height < 2:
            raise ValidationError("ROI must be at least 2x2 pixels")

    def validate_within(self, width: int, height: int) -> None:
        if self.x0 + self.width > width or self.y0 + self.height > height:
            raise BoundsError(
                f"ROI ({self.x0},{self.y0},{self.width},{self.height}) exceeds "
                f"image bounds {width}x{height}"
            )


class KeypointStatus(str, Enum):
    LIVE = "live"
    LOST_OUT_OF_BOUNDS = "lost_out_of_bounds"
    LOST_DIVERGED = "lost_diverged"
    LOST_UNTRACKABLE = "lost_untrackable"


@dataclass(frozen=True)
class Keypoint:
    """Sub-pixel point on a slice with a liveness status."""

    x: float
    y: float
    status: KeypointStatus = KeypointStatus.LIVE

    def __post_init__(self):
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        if not (np.isfinite(self.x) and np.isfinite(self.y)):
            raise ValidationError(f"keypoint coordinates must be finite, got ({self.x}, {self.y})")

    @property
    def alive(self) -> bool:
        return self.status is KeypointStatus.LIVE


@dataclass(frozen=True)
class KeypointSet:
    """Keypoints attached to one slice. List order is point identity:
    point k here corresponds to point k after propagation to a neighbor slice.
    """

    slice_index: int
    points: tuple[Keypoint, ...]

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))

    def __len__(self) -> int:
        return len(self.points)

    @property
    def live_count(self) -> int:
        return sum(1 for p in self.points if p.alive)

    def live_points(self) -> list[Keypoint]:
        return [p for p in self.points if p.alive]


@dataclass(frozen=True, eq=False)
class SliceMask:
    """Binary per-pixel mask, row-major bool array of shape (height, width)."""

    bits: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.bits)
        if arr.dtype != np.bool_:
            arr = arr.astype(bool)
        if arr.ndim != 2:
            raise ValidationError(f"mask must be a 2D array, got shape {arr.shape}")
        object.__setattr__(self, "bits", _freeze(arr))

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def count(self) -> int:
        return int(self.bits.sum())


@dataclass(frozen=True)
class TrackParams:
    """Tunables of the pyramidal Lucas-Kanade tracker.

    Defaults target ~1 mm slice spacing where inter-slice motion is small.
    fb_error_max is the forward-backward drift gate in pixels; None disables it.
    """

    pyramid_levels: int = 3
    window_radius: int = 10
    max_iterations: int = 30
    convergence_eps: float = 0.01
    min_eigenvalue: float = 1e-4
    fb_error_max: float | None = 1.0

    def __post_init__(self):
        if self.pyramid_levels < 1:
            raise ConfigError("pyramid_levels must be >= 1")
        if self.window_radius < 1:
            raise ConfigError("window_radius must be >= 1")
        if self.max_iterations < 1:
            raise ConfigError("max_iterations must be >= 1")
        if self.convergence_eps <= 0:
            raise ConfigError("convergence_eps must be positive")
        if self.min_eigenvalue < 0:
            raise ConfigError("min_eigenvalue must be >= 0")
        if self.fb_error_max is not None and self.fb_error_max <= 0:
            raise ConfigError("fb_error_max must be positive (or None to disable)")

    @property
    def window_size(self) -> int:
        return 2 * self.window_radius + 1


def crop(sl: GraySlice, roi: Roi) -> GraySlice:
    """Copy the ROI out of a slice."""
    roi.validate_within(sl.width, sl.height)
    block = sl.pixels[roi.y0 : roi.y0 + roi.height, roi.x0 : roi.x0 + roi.width]
    return GraySlice(block)


def normalize_intensities(raw, max_value: int) -> GraySlice:
    """Divide integer-valued pixels by max_value, yielding intensities in [0, 1]."""
    if max_value <= 0:
        raise ValidationError("max_value must be positive")
    arr = np.asarray(raw)
    if arr.ndim != 2:
        raise ValidationError(f"raw image must be 2D, got shape {arr.shape}")
    if arr.min() < 0:
        raise ValidationError("raw values must be non-negative")
    if arr.max() > max_value:
        raise ValidationError(
            f"raw value {arr.max()} exceeds max_value {max_value}"
        )
    return GraySlice(arr.astype(np.float64) / float(max_value))
