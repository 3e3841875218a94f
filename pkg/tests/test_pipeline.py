import numpy as np
import pytest

from phantoms import textured_slice, wave_params
from slicetrack.core import (
    GraySlice,
    Keypoint,
    KeypointSet,
    Roi,
    SliceMask,
    TrackParams,
    Volume,
)
from slicetrack.errors import SeedError, ValidationError
from slicetrack.pipeline import (
    SeedSpec,
    evaluate,
    evaluate_masks,
    propagate,
    reconstruct,
    reconstruct_masks,
    seed_keypoints,
    segment,
)

SMALL = TrackParams(pyramid_levels=2, window_radius=7)
TRIANGLE = ((20.0, 20.0), (44.0, 20.0), (32.0, 44.0))


def static_volume(n=5, shape=(64, 64), seed=5):
    ws = wave_params(np.random.default_rng(seed))
    sl = textured_slice(shape, ws)
    return Volume(slices=(sl,) * n)


def mask_from(idx, shape=(10, 20)):
    bits = np.zeros(shape, dtype=bool)
    bits.ravel()[list(idx)] = True
    return SliceMask(bits)


class TestSeedSpec:
    def test_manual_needs_three_points(self):
        with pytest.raises(SeedError):
            SeedSpec.manual([(1.0, 1.0), (2.0, 2.0)])

    def test_auto_needs_roi(self):
        with pytest.raises(SeedError):
            SeedSpec(mode="auto")

    def test_unknown_mode(self):
        with pytest.raises(ValidationError):
            SeedSpec(mode="magic", points=TRIANGLE)

    def test_bad_start_token(self):
        with pytest.raises(ValidationError):
            SeedSpec.manual(TRIANGLE, start_slice="middle")

    def test_resolve_center_floors(self):
        assert SeedSpec.manual(TRIANGLE).resolve_start(32) == 16
        assert SeedSpec.manual(TRIANGLE).resolve_start(5) == 2

    def test_resolve_explicit_and_bounds(self):
        spec = SeedSpec.manual(TRIANGLE, start_slice=3)
        assert spec.resolve_start(5) == 3
        with pytest.raises(ValidationError):
            spec.resolve_start(3)


class TestSeedKeypoints:
    def test_manual_points_become_live_keypoints(self):
        vol = static_volume()
        ks = seed_keypoints(vol, SeedSpec.manual(TRIANGLE, start_slice=1))
        assert ks.slice_index == 1
        assert ks.live_count == 3
        assert (ks.points[0].x, ks.points[0].y) == (20.0, 20.0)

    def test_manual_point_outside_slice_rejected(self):
        vol = static_volume()
        spec = SeedSpec.manual(((2.0, 2.0), (70.0, 2.0), (2.0, 9.0)))
        with pytest.raises(SeedError):
            seed_keypoints(vol, spec)

    def test_auto_finds_square_perimeter(self):
        img = np.full((64, 64), 0.2)
        img[20:44, 20:44] = 0.8
        vol = Volume(slices=(GraySlice(img),) * 3)
        ks = seed_keypoints(vol, SeedSpec.auto(Roi(13, 13, 40, 40)))
        assert ks.live_count >= 3
        for p in ks.points:
            dx = max(19.5 - p.x, p.x - 43.5, 0.0)
            dy = max(19.5 - p.y, p.y - 43.5, 0.0)
            outside = np.hypot(dx, dy)
            inside = min(p.x - 19.5, 43.5 - p.x, p.y - 19.5, 43.5 - p.y)
            ring_dist = outside if outside > 0 else inside
            assert ring_dist <= 2.0

    def test_auto_with_nothing_detectable_raises(self):
        vol = static_volume()
        from slicetrack.wavelet import DetectParams

        spec = SeedSpec.auto(
            Roi(8, 8, 40, 40),
            detect=DetectParams(threshold=10.0, threshold_mode="absolute"),
        )
        with pytest.raises(SeedError, match="lower the threshold"):
            seed_keypoints(vol, spec)


class TestPropagate:
    def test_static_volume_yields_mask_on_every_slice(self):
        vol = static_volume(n=5)
        initial = seed_keypoints(vol, SeedSpec.manual(TRIANGLE, start_slice=2))
        result = propagate(vol, initial, SMALL)
        assert (result.stop_up, result.stop_down) == (0, 4)
        assert sorted(result.per_slice) == [0, 1, 2, 3, 4]
        for i in range(5):
            rec = result.per_slice[i]
            assert rec.hull is not None
            assert rec.mask is not None
            assert rec.mask.count > 0
            assert rec.keypoints.slice_index == i

    def test_chain_halts_after_losing_slice(self):
        ws = wave_params(np.random.default_rng(5))
        tex = textured_slice((64, 64), ws)
        flat = GraySlice(np.full((64, 64), 0.5))
        vol = Volume(slices=(tex, tex, tex, tex, flat, flat))
        initial = seed_keypoints(vol, SeedSpec.manual(TRIANGLE, start_slice=1))
        result = propagate(vol, initial, SMALL)
        assert result.stop_up == 0
        # slice 4 is recorded with its losses, slice 5 is never visited
        assert result.stop_down == 4
        assert 5 not in result.per_slice
        rec = result.per_slice[4]
        assert rec.keypoints.live_count < 3
        assert all(not p.alive for p in rec.keypoints.points)
        assert rec.mask is None

    def test_seed_defaults_to_manual_provenance(self):
        vol = static_volume(n=3)
        initial = KeypointSet(
            slice_index=1, points=tuple(Keypoint(x, y) for x, y in TRIANGLE)
        )
        result = propagate(vol, initial, SMALL)
        assert result.seed.mode == "manual"
        assert result.seed.points == TRIANGLE
        assert result.seed.start_slice == 1

    def test_seed_slice_out_of_range(self):
        vol = static_volume(n=3)
        initial = KeypointSet(
            slice_index=7, points=tuple(Keypoint(x, y) for x, y in TRIANGLE)
        )
        with pytest.raises(ValidationError):
            propagate(vol, initial, SMALL)

    def test_collinear_seeds_give_no_hull_at_start(self):
        vol = static_volume(n=3)
        pts = tuple(Keypoint(20.0 + 6.0 * i, 30.0) for i in range(3))
        initial = KeypointSet(slice_index=1, points=pts)
        result = propagate(vol, initial, SMALL)
        rec = result.per_slice[1]
        assert rec.hull is None
        assert rec.mask is None
        assert rec.keypoints.live_count == 3

    def test_mask_or_empty_fills_gaps(self):
        vol = static_volume(n=3)
        initial = seed_keypoints(vol, SeedSpec.manual(TRIANGLE, start_slice=1))
        result = propagate(vol, initial, SMALL)
        empty = result.mask_or_empty(99)
        assert empty.count == 0
        assert (empty.height, empty.width) == (64, 64)
        assert result.mask_or_empty(1).count > 0

    def test_segment_records_the_auto_spec(self):
        img = np.full((64, 64), 0.2)
        img[20:44, 20:44] = 0.8
        vol = Volume(slices=(GraySlice(img),) * 3)
        spec = SeedSpec.auto(Roi(13, 13, 40, 40), start_slice=1)
        result = segment(vol, spec, SMALL)
        assert result.seed is spec
        assert result.per_slice[1].mask is not None


class TestEvaluate:
    def exact_dsc_fixture(self):
        # slice 0 -> 0.0, slice 1 -> 0.5, slice 2 -> 1.0
        truth = {
            0: mask_from(range(100)),
            1: mask_from(range(100)),
            2: mask_from(range(60)),
        }
        predicted = {
            0: mask_from(range(100, 200)),
            1: mask_from(range(50, 150)),
            2: mask_from(range(60)),
        }
        return predicted, truth

    def test_known_statistics(self):
        predicted, truth = self.exact_dsc_fixture()
        report = evaluate_masks(predicted, truth, (10, 20))
        assert report.per_slice_dsc == {0: 0.0, 1: 0.5, 2: 1.0}
        assert report.mean == pytest.approx(0.5)
        assert report.median == pytest.approx(0.5)
        assert report.std == pytest.approx(np.sqrt(1.0 / 6.0))
        assert report.iqr_low == pytest.approx(0.25)
        assert report.iqr_high == pytest.approx(0.75)
        assert report.n_evaluated == 3
        assert report.n_zero == 1

    def test_empty_truth_slices_skipped_by_default(self):
        truth = {0: mask_from(range(50)), 1: mask_from([])}
        predicted = {0: mask_from(range(50))}
        report = evaluate_masks(predicted, truth, (10, 20))
        assert report.n_evaluated == 1
        assert 1 not in report.per_slice_dsc

    def test_include_empty_truth(self):
        truth = {0: mask_from(range(50)), 1: mask_from([])}
        predicted = {0: mask_from(range(50))}
        report = evaluate_masks(predicted, truth, (10, 20), include_empty_truth=True)
        assert report.n_evaluated == 2
        assert report.per_slice_dsc[1] == 1.0  # both empty

    def test_missing_prediction_counts_as_empty(self):
        truth = {0: mask_from(range(50))}
        report = evaluate_masks({}, truth, (10, 20))
        assert report.per_slice_dsc[0] == 0.0
        assert report.n_zero == 1

    def test_nothing_to_evaluate(self):
        with pytest.raises(ValidationError, match="nothing to evaluate"):
            evaluate_masks({}, {0: mask_from([])}, (10, 20))

    def test_evaluate_uses_result_masks(self):
        vol = static_volume(n=3)
        initial = seed_keypoints(vol, SeedSpec.manual(TRIANGLE, start_slice=1))
        result = propagate(vol, initial, SMALL)
        truth = {i: result.per_slice[i].mask for i in range(3)}
        report = evaluate(result, truth)
        assert report.mean == 1.0
        assert report.n_zero == 0


class TestReconstruct:
    def test_voxel_count_and_dims(self):
        masks = {
            0: mask_from(range(4), (6, 8)),
            1: mask_from(range(5), (6, 8)),
            2: mask_from(range(6), (6, 8)),
        }
        vox = reconstruct_masks(masks, (6, 8), 3)
        assert vox.count == 15
        assert vox.dims == (8, 6, 3)
        assert vox.bits.shape == (3, 6, 8)

    def test_z_major_flatten_order(self):
        bits = np.zeros((6, 8), dtype=bool)
        bits[1, 2] = True
        vox = reconstruct_masks({1: SliceMask(bits)}, (6, 8), 2)
        flat = np.flatnonzero(vox.bits.ravel())
        assert list(flat) == [1 * 6 * 8 + 1 * 8 + 2]

    def test_unmasked_slices_are_empty_planes(self):
        masks = {0: mask_from(range(3), (6, 8)), 2: mask_from(range(2), (6, 8))}
        vox = reconstruct_masks(masks, (6, 8), 4)
        assert vox.bits[1].sum() == 0
        assert vox.bits[3].sum() == 0
        assert vox.count == 5

    def test_spacing_recorded(self):
        vox = reconstruct_masks(
            {0: mask_from(range(3), (6, 8))}, (6, 8), 1, in_plane_mm=0.5, spacing_mm=2.0
        )
        assert vox.spacing_mm == (0.5, 0.5, 2.0)

    def test_no_masks_rejected(self):
        with pytest.raises(ValidationError):
            reconstruct_masks({}, (6, 8), 3)

    def test_index_outside_volume_rejected(self):
        with pytest.raises(ValidationError):
            reconstruct_masks({5: mask_from(range(3), (6, 8))}, (6, 8), 3)

    def test_reconstruct_from_result(self):
        vol = static_volume(n=3)
        initial = seed_keypoints(vol, SeedSpec.manual(TRIANGLE, start_slice=1))
        result = propagate(vol, initial, SMALL)
        vox = reconstruct(result)
        assert vox.dims == (64, 64, 3)
        assert vox.count == sum(result.per_slice[i].mask.count for i in range(3))
