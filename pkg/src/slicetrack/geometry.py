"""Convex hulls, polygon rasterization, and the Dice overlap metric."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import SliceMask
from .errors import DegenerateHullError, ValidationError


@dataclass(frozen=True)
class Polygon:
    """Simple polygon as an ordered vertex tuple, counter-clockwise."""

    vertices: tuple[tuple[float, float], ...]

    def __post_init__(self):
        verts = tuple((float(x), float(y)) for x, y in self.vertices)
        if len(verts) < 3:
            raise ValidationError("polygon needs at least 3 vertices")
        for a, b in zip(verts, verts[1:] + verts[:1]):
            if a == b:
                raise ValidationError("polygon has repeated consecutive vertices")
        object.__setattr__(self, "vertices", verts)

    def area(self) -> float:
        """Shoelace area; positive for counter-clockwise orientation."""
        v = self.vertices
        s = 0.0
        for (x0, y0), (x1, y1) in zip(v, v[1:] + v[:1]):
            s += x0 * y1 - x1 * y0
        return 0.5 * s

    def perimeter(self) -> float:
        v = self.vertices
        return sum(
            float(np.hypot(x1 - x0, y1 - y0))
            for (x0, y0), (x1, y1) in zip(v, v[1:] + v[:1])
        )


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull(points) -> Polygon:
    """Smallest convex polygon containing the points (Andrew monotone chain).

    Collinear boundary points are dropped; the result is strictly convex and
    counter-clockwise. Raises DegenerateHullError for < 3 distinct points or
    an all-collinear set.
    """
    pts = sorted({(float(x), float(y)) for x, y in points})
    if len(pts) < 3:
        raise DegenerateHullError(f"need >= 3 distinct points, got {len(pts)}")

    lower: list[tuple[float, float]] = []
    for p in pts:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0.0:
            lower.pop()
        lower.append(p)
    upper: list[tuple[float, float]] = []
    for p in reversed(pts):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0.0:
            upper.pop()
        upper.append(p)

    hull = lower[:-1] + upper[:-1]
    if len(hull) < 3:
        raise DegenerateHullError("points are collinear")
    return Polygon(tuple(hull))


def rasterize(poly: Polygon, width: int, height: int) -> SliceMask:
    """Fill a convex polygon onto a width x height pixel grid.

    Pixel (i, j) is set iff its center (i + 0.5, j + 0.5) lies inside the
    polygon or on its boundary. Parts outside the grid are clipped. Assumes a
    counter-clockwise convex polygon.
    """
    if width < 1 or height < 1:
        raise ValidationError("mask dimensions must be positive")
    mask = np.zeros((height, width), dtype=bool)
    verts = poly.vertices

    xs = [v[0] for v in verts]
    ys = [v[1] for v in verts]
    # candidate pixel range: centers at i + 0.5 within the polygon bbox
    ix0 = max(0, int(np.floor(min(xs) - 0.5)))
    ix1 = min(width - 1, int(np.ceil(max(xs) - 0.5)))
    iy0 = max(0, int(np.floor(min(ys) - 0.5)))
    iy1 = min(height - 1, int(np.ceil(max(ys) - 0.5)))
    if ix1 < ix0 or iy1 < iy0:
        return SliceMask(mask)

    px = np.arange(ix0, ix1 + 1, dtype=np.float64) + 0.5
    py = np.arange(iy0, iy1 + 1, dtype=np.float64) + 0.5
    pxg, pyg = np.meshgrid(px, py)

    inside = np.ones(pxg.shape, dtype=bool)
    for (x1, y1), (x2, y2) in zip(verts, verts[1:] + verts[:1]):
        inside &= (x2 - x1) * (pyg - y1) - (y2 - y1) * (pxg - x1) >= 0.0

    mask[iy0 : iy1 + 1, ix0 : ix1 + 1] = inside
    return SliceMask(mask)


def dsc(a: SliceMask, b: SliceMask) -> float:
    """Dice similarity 2|A n B| / (|A| + |B|).

    Both masks empty counts as perfect agreement (1.0); exactly one empty is 0.0.
    """
    if a.bits.shape != b.bits.shape:
        raise ValidationError(
            f"mask dimensions differ: {a.bits.shape} vs {b.bits.shape}"
        )
    na = int(a.bits.sum())
    nb = int(b.bits.sum())
    if na == 0 and nb == 0:
        return 1.0
    inter = int(np.logical_and(a.bits, b.bits).sum())
    return 2.0 * inter / (na + nb)
