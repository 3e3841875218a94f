"""Pyramidal, iterative Lucas-Kanade sparse optical flow between adjacent slices.

Coarse-to-fine estimation: at each pyramid level the 2x2 structure-tensor
normal equations are iterated over a square window around the point, with
bilinear sampling for sub-pixel reads and central-difference gradients taken
on the source slice. Points can be lost three ways: a rank-deficient
structure tensor at the finest level (untrackable), a window leaving the
image at the finest level (out of bounds), or a failed forward-backward
consistency check (diverged).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .core import GraySlice, Keypoint, KeypointSet, KeypointStatus, TrackParams
from .errors import ConfigError, ValidationError


@dataclass(frozen=True, eq=False)
class Pyramid:
    """Level 0 is full resolution; each level is the 2x2 block mean of the
    previous with floor-halved dimensions (a trailing odd row/column does not
    produce an extra block).
    """

    levels: tuple[GraySlice, ...]

    def __post_init__(self):
        if len(self.levels) < 1:
            raise ValidationError("pyramid needs at least one level")
        object.__setattr__(self, "levels", tuple(self.levels))

    def __len__(self) -> int:
        return len(self.levels)


@dataclass(frozen=True)
class TrackOutcome:
    point: Keypoint
    iterations_used: int
    residual: float
    fb_error: float | None = None


def _downsample2(arr: np.ndarray) -> np.ndarray:
    h2, w2 = arr.shape[0] // 2, arr.shape[1] // 2
    trimmed = arr[: h2 * 2, : w2 * 2]
    return trimmed.reshape(h2, 2, w2, 2).mean(axis=(1, 3))


def build_pyramid(sl: GraySlice, levels: int) -> Pyramid:
    """Stack of block-mean reductions, level 0 = the input slice."""
    if levels < 1:
        raise ConfigError("pyramid needs at least one level")
    out = [sl]
    arr = sl.pixels
    for lvl in range(1, levels):
        if arr.shape[0] // 2 < 2 or arr.shape[1] // 2 < 2:
            raise ConfigError(
                f"level {lvl} of a {sl.width}x{sl.height} image would be "
                f"smaller than 2x2; reduce pyramid_levels"
            )
        arr = _downsample2(arr)
        out.append(GraySlice(arr))
    return Pyramid(tuple(out))


def _check_pair(prev_pyr: Pyramid, next_pyr: Pyramid, params: TrackParams) -> None:
    if len(prev_pyr) != len(next_pyr):
        raise ValidationError("pyramids have different level counts")
    if len(prev_pyr) != params.pyramid_levels:
        raise ValidationError(
            f"pyramid has {len(prev_pyr)} levels, params expect "
            f"{params.pyramid_levels}"
        )
    for a, b in zip(prev_pyr.levels, next_pyr.levels):
        if (a.width, a.height) != (b.width, b.height):
            raise ValidationError("pyramid levels differ in size")
    coarsest = prev_pyr.levels[-1]
    if min(coarsest.width, coarsest.height) < params.window_size:
        raise ConfigError(
            f"{params.window_size}x{params.window_size} window does not fit "
            f"the {coarsest.width}x{coarsest.height} coarsest level; reduce "
            f"pyramid_levels or window_radius"
        )


def _bilinear_clamped(arr: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Sample arr at sub-pixel positions, clamping coordinates to the edge."""
    h, w = arr.shape
    xs = np.clip(xs, 0.0, w - 1.0)
    ys = np.clip(ys, 0.0, h - 1.0)
    x0 = np.clip(np.floor(xs).astype(np.intp), 0, w - 2) if w > 1 else np.zeros_like(xs, dtype=np.intp)
    y0 = np.clip(np.floor(ys).astype(np.intp), 0, h - 2) if h > 1 else np.zeros_like(ys, dtype=np.intp)
    fx = xs - x0
    fy = ys - y0
    tl = arr[y0, x0]
    tr = arr[y0, x0 + 1]
    bl = arr[y0 + 1, x0]
    br = arr[y0 + 1, x0 + 1]
    top = tl + (tr - tl) * fx
    bot = bl + (br - bl) * fx
    return top + (bot - top) * fy


def _in_bounds(arr: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> bool:
    h, w = arr.shape
    return bool(
        (xs >= 0.0).all()
        and (xs <= w - 1.0).all()
        and (ys >= 0.0).all()
        and (ys <= h - 1.0).all()
    )


class _LevelData:
    """Per-level gradient arrays, computed lazily and shared across points."""

    def __init__(self, pyramid: Pyramid):
        self.pyramid = pyramid
        self._grads: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    def grads(self, level: int) -> tuple[np.ndarray, np.ndarray]:
        if level not in self._grads:
            gy, gx = np.gradient(self.pyramid.levels[level].pixels)
            self._grads[level] = (gx, gy)
        return self._grads[level]


def _track_once(
    prev_pyr: Pyramid,
    next_pyr: Pyramid,
    prev_data: _LevelData,
    p: Keypoint,
    params: TrackParams,
) -> TrackOutcome:
    """One forward pass of coarse-to-fine LK (no forward-backward check)."""
    r = params.window_radius
    offs = np.arange(-r, r + 1, dtype=np.float64)
    ox, oy = np.meshgrid(offs, offs)
    npix = ox.size

    vx = vy = 0.0  # displacement, in coarsest-level pixels at first
    iterations = 0
    residual = float("nan")

    for level in range(params.pyramid_levels - 1, -1, -1):
        finest = level == 0
        scale = 2.0**level
        prev_img = prev_pyr.levels[level].pixels
        next_img = next_pyr.levels[level].pixels
        gx_img, gy_img = prev_data.grads(level)

        px = p.x / scale
        py = p.y / scale
        wx = px + ox
        wy = py + oy

        if finest and not _in_bounds(prev_img, wx, wy):
            return TrackOutcome(
                point=Keypoint(p.x, p.y, KeypointStatus.LOST_OUT_OF_BOUNDS),
                iterations_used=iterations,
                residual=residual,
            )

        prev_win = _bilinear_clamped(prev_img, wx, wy)
        gx = _bilinear_clamped(gx_img, wx, wy)
        gy = _bilinear_clamped(gy_img, wx, wy)
        gxx = float((gx * gx).sum())
        gxy = float((gx * gy).sum())
        gyy = float((gy * gy).sum())
        trace = gxx + gyy
        lam_min = 0.5 * (trace - float(np.hypot(gxx - gyy, 2.0 * gxy)))

        if finest and lam_min / npix < params.min_eigenvalue:
            return TrackOutcome(
                point=Keypoint(p.x, p.y, KeypointStatus.LOST_UNTRACKABLE),
                iterations_used=iterations,
                residual=residual,
            )

        det = gxx * gyy - gxy * gxy
        if det <= 0.0 or lam_min / npix < 1e-12:
            # rank-deficient at a coarse level: skip, let finer levels decide
            if not finest:
                vx *= 2.0
                vy *= 2.0
            continue

        for _ in range(params.max_iterations):
            sx = wx + vx
            sy = wy + vy
            if finest and not _in_bounds(next_img, sx, sy):
                return TrackOutcome(
                    point=Keypoint(
                        px + vx, py + vy, KeypointStatus.LOST_OUT_OF_BOUNDS
                    ),
                    iterations_used=iterations,
                    residual=residual,
                )
            diff = prev_win - _bilinear_clamped(next_img, sx, sy)
            bx = float((diff * gx).sum())
            by = float((diff * gy).sum())
            dx = (gyy * bx - gxy * by) / det
            dy = (gxx * by - gxy * bx) / det
            vx += dx
            vy += dy
            iterations += 1
            residual = float(np.abs(diff).mean())
            if dx * dx + dy * dy < params.convergence_eps**2:
                break

        if not finest:
            vx *= 2.0
            vy *= 2.0

    nx = p.x + vx
    ny = p.y + vy
    w0 = prev_pyr.levels[0].width
    h0 = prev_pyr.levels[0].height
    if not (0.0 <= nx < w0 and 0.0 <= ny < h0):
        return TrackOutcome(
            point=Keypoint(nx, ny, KeypointStatus.LOST_OUT_OF_BOUNDS),
            iterations_used=iterations,
            residual=residual,
        )
    return TrackOutcome(
        point=Keypoint(nx, ny, KeypointStatus.LIVE),
        iterations_used=iterations,
        residual=residual,
    )


def track_point(
    prev_pyr: Pyramid,
    next_pyr: Pyramid,
    p: Keypoint,
    params: TrackParams,
    _prev_data: _LevelData | None = None,
    _next_data: _LevelData | None = None,
) -> TrackOutcome:
    """Carry one live point from the prev pyramid to the next one."""
    if p.status is not KeypointStatus.LIVE:
        raise ValidationError("track_point requires a live keypoint")
    lvl0 = prev_pyr.levels[0]
    if not (0.0 <= p.x < lvl0.width and 0.0 <= p.y < lvl0.height):
        raise ValidationError(
            f"point ({p.x}, {p.y}) is outside the {lvl0.width}x{lvl0.height} image"
        )
    _check_pair(prev_pyr, next_pyr, params)
    prev_data = _prev_data if _prev_data is not None else _LevelData(prev_pyr)

    fwd = _track_once(prev_pyr, next_pyr, prev_data, p, params)
    if fwd.point.status is not KeypointStatus.LIVE or params.fb_error_max is None:
        return fwd

    next_data = _next_data if _next_data is not None else _LevelData(next_pyr)
    back = _track_once(next_pyr, prev_pyr, next_data, fwd.point, params)
    if back.point.status is KeypointStatus.LIVE:
        fb_error = float(np.hypot(back.point.x - p.x, back.point.y - p.y))
    else:
        fb_error = float("inf")
    if fb_error > params.fb_error_max:
        return replace(
            fwd,
            point=replace(fwd.point, status=KeypointStatus.LOST_DIVERGED),
            fb_error=fb_error,
        )
    return replace(fwd, fb_error=fb_error)


def track_set_pyramids(
    prev_pyr: Pyramid,
    next_pyr: Pyramid,
    points: KeypointSet,
    params: TrackParams,
    next_index: int,
) -> KeypointSet:
    """track_set against pre-built pyramids (lets a chain reuse them)."""
    _check_pair(prev_pyr, next_pyr, params)
    prev_data = _LevelData(prev_pyr)
    next_data = _LevelData(next_pyr)
    moved = []
    for kp in points.points:
        if not kp.alive:
            moved.append(kp)  # lost points are frozen
            continue
        outcome = track_point(
            prev_pyr, next_pyr, kp, params, _prev_data=prev_data, _next_data=next_data
        )
        moved.append(outcome.point)
    return KeypointSet(slice_index=next_index, points=tuple(moved))


def track_set(
    prev_slice: GraySlice,
    next_slice: GraySlice,
    points: KeypointSet,
    params: TrackParams,
    next_index: int | None = None,
) -> KeypointSet:
    """Propagate a keypoint set from one slice to an adjacent slice.

    Point order is preserved; already-lost points keep their coordinates and
    status. next_index defaults to points.slice_index + 1.
    """
    if (prev_slice.width, prev_slice.height) != (next_slice.width, next_slice.height):
        raise ValidationError(
            f"slice dimensions differ: {prev_slice.width}x{prev_slice.height} "
            f"vs {next_slice.width}x{next_slice.height}"
        )
    if next_index is None:
        next_index = points.slice_index + 1
    prev_pyr = build_pyramid(prev_slice, params.pyramid_levels)
    next_pyr = build_pyramid(next_slice, params.pyramid_levels)
    return track_set_pyramids(prev_pyr, next_pyr, points, params, next_index)
