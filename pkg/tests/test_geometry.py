import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from slicetrack.errors import DegenerateHullError, ValidationError
from slicetrack.geometry import Polygon, convex_hull, dsc, rasterize


def hull_xy(points):
    return list(convex_hull(points).vertices)


class TestPolygon:
    def test_needs_three_vertices(self):
        with pytest.raises(ValidationError):
            Polygon(((0.0, 0.0), (1.0, 0.0)))

    def test_rejects_consecutive_repeats(self):
        with pytest.raises(ValidationError):
            Polygon(((0.0, 0.0), (0.0, 0.0), (1.0, 1.0)))

    def test_signed_area_ccw_positive(self):
        sq = Polygon(((0.0, 0.0), (2.0, 0.0), (2.0, 2.0), (0.0, 2.0)))
        assert sq.area() == pytest.approx(4.0)
        cw = Polygon(((0.0, 0.0), (0.0, 2.0), (2.0, 2.0), (2.0, 0.0)))
        assert cw.area() == pytest.approx(-4.0)

    def test_perimeter(self):
        sq = Polygon(((0.0, 0.0), (2.0, 0.0), (2.0, 2.0), (0.0, 2.0)))
        assert sq.perimeter() == pytest.approx(8.0)


class TestConvexHull:
    def test_triangle_is_its_own_hull(self):
        out = hull_xy([(0.0, 0.0), (4.0, 0.0), (0.0, 4.0)])
        assert set(out) == {(0.0, 0.0), (4.0, 0.0), (0.0, 4.0)}
        assert len(out) == 3

    def test_interior_point_is_dropped(self):
        out = hull_xy([(0.0, 0.0), (4.0, 0.0), (4.0, 4.0), (0.0, 4.0), (2.0, 2.0)])
        assert set(out) == {(0.0, 0.0), (4.0, 0.0), (4.0, 4.0), (0.0, 4.0)}
        assert len(out) == 4

    def test_collinear_input_is_degenerate(self):
        with pytest.raises(DegenerateHullError):
            convex_hull([(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)])

    def test_too_few_points_is_degenerate(self):
        with pytest.raises(DegenerateHullError):
            convex_hull([(0.0, 0.0), (1.0, 0.0)])

    def test_duplicate_points_collapse(self):
        out = hull_xy([(0.0, 0.0), (0.0, 0.0), (4.0, 0.0), (0.0, 4.0), (4.0, 0.0)])
        assert len(out) == 3

    def test_output_is_ccw(self):
        poly = convex_hull([(0.0, 0.0), (3.0, 1.0), (1.0, 4.0), (2.0, 2.0)])
        assert poly.area() > 0

    def test_boundary_collinear_points_dropped(self):
        # midpoint of an edge must not appear as a hull vertex
        out = hull_xy([(0.0, 0.0), (2.0, 0.0), (4.0, 0.0), (0.0, 4.0)])
        assert (2.0, 0.0) not in out
        assert len(out) == 3

    @given(
        st.lists(
            st.tuples(
                st.integers(-20, 20).map(float), st.integers(-20, 20).map(float)
            ),
            min_size=3,
            max_size=24,
        )
    )
    def test_idempotent(self, pts):
        try:
            first = convex_hull(pts)
        except DegenerateHullError:
            return
        second = convex_hull(first.vertices)
        assert second.vertices == first.vertices

    @given(
        st.lists(
            st.tuples(
                st.integers(-20, 20).map(float), st.integers(-20, 20).map(float)
            ),
            min_size=3,
            max_size=24,
        )
    )
    def test_contains_all_inputs(self, pts):
        try:
            poly = convex_hull(pts)
        except DegenerateHullError:
            return
        vs = list(poly.vertices)
        n = len(vs)
        for (px, py) in pts:
            for i in range(n):
                ax, ay = vs[i]
                bx, by = vs[(i + 1) % n]
                cross = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
                assert cross >= -1e-9


class TestRasterize:
    def test_unit_square_covers_exactly_four_pixels(self):
        poly = Polygon(((0.0, 0.0), (2.0, 0.0), (2.0, 2.0), (0.0, 2.0)))
        mask = rasterize(poly, height=4, width=4)
        assert mask.count == 4
        assert mask.bits[:2, :2].all()
        assert not mask.bits[2:, :].any()
        assert not mask.bits[:, 2:].any()

    def test_pixel_center_convention(self):
        # a polygon grazing the pixel center at (0.5, 0.5) includes that pixel
        poly = Polygon(((0.5, 0.5), (3.5, 0.5), (0.5, 3.5)))
        mask = rasterize(poly, height=4, width=4)
        assert mask.bits[0, 0]

    def test_polygon_outside_frame_is_empty(self):
        poly = Polygon(((10.0, 10.0), (12.0, 10.0), (12.0, 12.0)))
        mask = rasterize(poly, height=4, width=4)
        assert mask.count == 0

    def test_row_convexity(self):
        rng = np.random.default_rng(7)
        for _ in range(25):
            pts = [(float(x), float(y)) for x, y in rng.uniform(0, 30, (10, 2))]
            try:
                poly = convex_hull(pts)
            except DegenerateHullError:
                continue
            mask = rasterize(poly, height=32, width=32)
            for row in mask.bits:
                cols = np.flatnonzero(row)
                if cols.size:
                    assert cols[-1] - cols[0] + 1 == cols.size

    def test_area_agreement(self):
        # pixel count tracks the shoelace area to within one perimeter's worth
        rng = np.random.default_rng(11)
        for _ in range(25):
            pts = [(float(x), float(y)) for x, y in rng.uniform(2, 60, (12, 2))]
            try:
                poly = convex_hull(pts)
            except DegenerateHullError:
                continue
            area = poly.area()
            if area < 4.0:
                continue
            mask = rasterize(poly, height=64, width=64)
            assert abs(mask.count - area) <= poly.perimeter()


class TestDsc:
    def make(self, idx, shape=(10, 20)):
        bits = np.zeros(shape, dtype=bool)
        bits.ravel()[idx] = True
        from slicetrack.core import SliceMask

        return SliceMask(bits)

    def test_half_overlap(self):
        a = self.make(range(0, 100), (10, 20))
        b = self.make(range(50, 150), (10, 20))
        assert dsc(a, b) == pytest.approx(0.5)

    def test_identical(self):
        a = self.make(range(0, 60))
        assert dsc(a, a) == 1.0

    def test_disjoint(self):
        a = self.make(range(0, 50))
        b = self.make(range(50, 100))
        assert dsc(a, b) == 0.0

    def test_both_empty_is_one(self):
        a = self.make([])
        b = self.make([])
        assert dsc(a, b) == 1.0

    def test_one_empty_is_zero(self):
        a = self.make([])
        b = self.make(range(12))
        assert dsc(a, b) == 0.0
        assert dsc(b, a) == 0.0

    def test_shape_mismatch_rejected(self):
        a = self.make([], (4, 4))
        b = self.make([], (4, 5))
        with pytest.raises(ValidationError):
            dsc(a, b)

    @given(st.integers(0, 2**16 - 1), st.integers(0, 2**16 - 1))
    def test_symmetric(self, seed_a, seed_b):
        rng_a = np.random.default_rng(seed_a)
        rng_b = np.random.default_rng(seed_b)
        from slicetrack.core import SliceMask

        a = SliceMask(rng_a.random((8, 8)) > 0.5)
        b = SliceMask(rng_b.random((8, 8)) > 0.5)
        assert dsc(a, b) == dsc(b, a)
