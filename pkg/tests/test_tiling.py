import numpy as np
import pytest

from palmwatch.errors import BoundsError, CompletenessError, ParameterError
from palmwatch.pixel_model import ProbabilityMap
from palmwatch.tiling import TileWindow, extract_tile, stitch, tile_plan

from conftest import random_raster


def band_as_probability(raster, window=None):
    samples = raster.bands[0].samples
    valid = raster.valid_mask().bits
    return ProbabilityMap(values=np.where(valid, samples, np.nan), valid=valid)


class TestPlan:
    def test_exact_grid(self):
        plan = tile_plan(2048, 3072, 1024, 0)
        assert len(plan.windows) == 6
        assert (plan.n_cols, plan.n_rows) == (2, 3)
        assert all(w.padded_right == 0 and w.padded_bottom == 0 for w in plan.windows)

    def test_scene_smaller_than_tile(self):
        plan = tile_plan(1000, 1000, 1024, 0)
        assert len(plan.windows) == 1
        (w,) = plan.windows
        assert (w.width, w.height) == (1000, 1000)
        assert (w.padded_right, w.padded_bottom) == (24, 24)

    def test_exact_fit_single_window(self):
        plan = tile_plan(1024, 1024, 1024, 0)
        assert len(plan.windows) == 1
        assert plan.windows[0] == TileWindow(0, 0, 1024, 1024, 0, 0)

    def test_overlap_too_large(self):
        with pytest.raises(ParameterError):
            tile_plan(100, 100, 64, 64)

    def test_deterministic(self):
        assert tile_plan(513, 700, 128, 32) == tile_plan(513, 700, 128, 32)

    @pytest.mark.parametrize("overlap", [0, 16, 100])
    def test_coverage_counts(self, rng, overlap):
        for _ in range(10):
            scene_w = int(rng.integers(1, 600))
            scene_h = int(rng.integers(1, 600))
            tile = int(rng.integers(overlap + 1, 256))
            plan = tile_plan(scene_w, scene_h, tile, overlap)
            cover = np.zeros((scene_h, scene_w), dtype=int)
            for w in plan.windows:
                assert w.x >= 0 and w.y >= 0
                assert w.width >= 1 and w.height >= 1
                assert w.width + w.padded_right == tile
                assert w.height + w.padded_bottom == tile
                cover[w.y : w.y + w.height, w.x : w.x + w.width] += 1
            assert (cover >= 1).all()
            if overlap == 0:
                assert (cover == 1).all()

    def test_contributor_counts_match_geometry(self):
        # 1-D layout along x: windows at 0 and 96 with tile 128, overlap 32
        plan = tile_plan(224, 1, 128, 32)
        cover = np.zeros(224, dtype=int)
        for w in plan.windows:
            cover[w.x : w.x + w.width] += 1
        expected = np.ones(224, dtype=int)
        expected[96:128] = 2
        np.testing.assert_array_equal(cover, expected)


class TestExtract:
    def test_exact_fit_identical(self, rng):
        raster = random_raster(rng, 64, 48, band_names=("a", "b"))
        window = TileWindow(16, 8, 32, 32, 0, 0)
        tile = extract_tile(raster, window)
        assert tile.origin == (16, 8)
        for name in ("a", "b"):
            np.testing.assert_array_equal(
                tile.band(name).samples, raster.band(name).samples[8:40, 16:48]
            )

    def test_padding_is_nodata(self, rng):
        raster = random_raster(rng, 40, 40, nodata=-999.0)
        plan = tile_plan(40, 40, 32, 0)
        window = plan.windows[-1]  # bottom-right, padded
        tile = extract_tile(raster, window)
        assert (tile.width, tile.height) == (32, 32)
        assert (tile.band("red").samples[:, window.width :] == -999.0).all()
        mask = tile.valid_mask()
        assert not mask.bits[:, window.width :].any()
        assert mask.bits[: window.height, : window.width].all()

    def test_padding_nan_when_no_nodata(self, rng):
        raster = random_raster(rng, 30, 30)
        plan = tile_plan(30, 30, 32, 0)
        tile = extract_tile(raster, plan.windows[0])
        assert np.isnan(tile.band("red").samples[:, 30:]).all()
        assert not tile.valid_mask().bits[:, 30:].any()

    def test_window_outside_scene(self, rng):
        raster = random_raster(rng, 20, 20)
        with pytest.raises(BoundsError):
            extract_tile(raster, TileWindow(16, 0, 8, 8, 0, 0))

    def test_every_pixel_in_some_tile(self, rng):
        raster = random_raster(rng, 100, 70, band_names=("v",))
        plan = tile_plan(100, 70, 32, 8)
        seen = np.zeros((70, 100), dtype=int)
        for w in plan.windows:
            tile = extract_tile(raster, w)
            np.testing.assert_array_equal(
                tile.band("v").samples[: w.height, : w.width],
                raster.band("v").samples[w.y : w.y + w.height, w.x : w.x + w.width],
            )
            seen[w.y : w.y + w.height, w.x : w.x + w.width] += 1
        assert (seen >= 1).all()


class TestStitch:
    def test_round_trip_identity(self, rng):
        raster = random_raster(rng, 150, 90, band_names=("p",))
        plan = tile_plan(150, 90, 64, 0)
        outputs = []
        for w in plan.windows:
            tile = extract_tile(raster, w)
            outputs.append((w, band_as_probability(tile)))
        stitched = stitch(plan, outputs)
        assert stitched.valid.all()
        np.testing.assert_array_equal(
            stitched.values.view(np.uint32), raster.band("p").samples.view(np.uint32)
        )

    def test_overlap_mean(self):
        plan = tile_plan(6, 2, 4, 2)
        assert len(plan.windows) == 2
        w0, w1 = plan.windows
        m0 = ProbabilityMap(np.full((4, 4), 0.2, np.float32), np.ones((4, 4), bool))
        m1 = ProbabilityMap(np.full((4, 4), 0.6, np.float32), np.ones((4, 4), bool))
        out = stitch(plan, [(w0, m0), (w1, m1)])
        np.testing.assert_array_equal(out.values[:, :2], np.float32(0.2))
        np.testing.assert_array_equal(out.values[:, 2:4], np.float32(0.4))
        np.testing.assert_array_equal(out.values[:, 4:], np.float32(0.6))

    @pytest.mark.parametrize("overlap", [0, 5, 20])
    def test_constant_tiles_constant_scene(self, overlap):
        plan = tile_plan(100, 80, 32, overlap)
        outputs = [
            (w, ProbabilityMap(np.full((32, 32), 0.7, np.float32), np.ones((32, 32), bool)))
            for w in plan.windows
        ]
        out = stitch(plan, outputs)
        assert out.valid.all()
        np.testing.assert_array_equal(out.values, np.float32(0.7))

    def test_missing_window_named(self):
        plan = tile_plan(64, 64, 32, 0)
        outputs = [
            (w, ProbabilityMap(np.zeros((32, 32), np.float32), np.ones((32, 32), bool)))
            for w in plan.windows[:-1]
        ]
        with pytest.raises(CompletenessError, match=r"\(32, 32\)"):
            stitch(plan, outputs)

    def test_duplicate_window_rejected(self):
        plan = tile_plan(32, 32, 32, 0)
        m = ProbabilityMap(np.zeros((32, 32), np.float32), np.ones((32, 32), bool))
        with pytest.raises(CompletenessError, match="more than once"):
            stitch(plan, [(plan.windows[0], m), (plan.windows[0], m)])

    def test_invalid_pixels_excluded_from_mean(self):
        plan = tile_plan(6, 2, 4, 2)
        w0, w1 = plan.windows
        valid0 = np.ones((4, 4), bool)
        valid0[:, 2:] = False  # w0's overlap columns carry no data
        m0 = ProbabilityMap(np.full((4, 4), 0.2, np.float32), valid0)
        m1 = ProbabilityMap(np.full((4, 4), 0.6, np.float32), np.ones((4, 4), bool))
        out = stitch(plan, [(w0, m0), (w1, m1)])
        np.testing.assert_array_equal(out.values[:, 2:4], np.float32(0.6))

    def test_all_invalid_stays_invalid(self):
        plan = tile_plan(4, 4, 4, 0)
        m = ProbabilityMap(np.full((4, 4), np.nan, np.float32), np.zeros((4, 4), bool))
        out = stitch(plan, [(plan.windows[0], m)])
        assert not out.valid.any()
