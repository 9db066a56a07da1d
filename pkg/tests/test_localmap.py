import math
from dataclasses import replace

import numpy as np
import pytest

from dcbfnav.geometry import RobotState
from dcbfnav.localmap import (
    MapConfig,
    TraversabilityThresholds,
    build_grid,
    obstacle_mask,
    sobel_laplace,
)

CFG = MapConfig()  # 10 m x 10 m at 0.1 m


def flat_grid(level=0.0, robot=RobotState(0, 0, 0)):
    xs = np.arange(-4.95, 5.0, 0.1)
    pts = np.array([(x, y, level) for x in xs for y in xs])
    return build_grid(pts, robot, CFG)


class TestBuildGrid:
    def test_dimensions_match_config(self):
        g = build_grid(np.empty((0, 3)), RobotState(0, 0, 0), CFG)
        assert g.width == g.height == 100
        assert g.resolution == 0.1

    def test_single_point_single_cell(self):
        g = build_grid(np.array([[0.05, 0.05, 1.0]]), RobotState(0, 0, 0), CFG)
        known = np.argwhere(~np.isnan(g.elevation))
        assert len(known) == 1
        ix, iy = known[0]
        assert g.elevation[ix, iy] == 1.0

    def test_max_rule_in_shared_cell(self):
        pts = np.array([[0.05, 0.05, 0.3], [0.06, 0.04, 0.8]])
        g = build_grid(pts, RobotState(0, 0, 0), CFG)
        known = np.argwhere(~np.isnan(g.elevation))
        assert len(known) == 1
        assert g.elevation[known[0][0], known[0][1]] == 0.8

    def test_passthrough_crop(self):
        g = build_grid(np.array([[20.0, 0.0, 1.0]]), RobotState(0, 0, 0), CFG)
        assert np.all(np.isnan(g.elevation))

    def test_empty_cloud_all_unknown(self):
        g = build_grid(np.empty((0, 3)), RobotState(0, 0, 0), CFG)
        assert np.all(np.isnan(g.elevation))

    def test_z_crop(self):
        pts = np.array([[0.0, 0.0, 5.0], [1.0, 0.0, -2.0]])
        g = build_grid(pts, RobotState(0, 0, 0), CFG)
        assert np.all(np.isnan(g.elevation))

    def test_grid_centered_on_robot(self):
        g = build_grid(np.array([[3.05, -2.05, 0.7]]), RobotState(3.0, -2.0, 0.5), CFG)
        ix, iy = g.world_to_cell(3.05, -2.05)
        assert g.elevation[ix, iy] == 0.7


class TestSobelLaplace:
    def test_flat_field_zero(self):
        g = flat_grid(0.5)
        gs, gl = sobel_laplace(g, (50, 50))
        assert gs == pytest.approx(0.0, abs=1e-12)
        assert gl == pytest.approx(0.0, abs=1e-12)

    def test_linear_ramp(self):
        g = flat_grid()
        c = 0.02
        ramp = np.tile(c * np.arange(100)[:, None], (1, 100))
        g = replace(g, elevation=ramp)
        gs, gl = sobel_laplace(g, (50, 50))
        assert gs == pytest.approx(8 * c, rel=1e-9)
        assert gl == pytest.approx(0.0, abs=1e-12)

    def test_spike(self):
        g = flat_grid()
        field = np.zeros((100, 100))
        height = 1.7
        field[40, 60] = height
        g = replace(g, elevation=field)
        gs, gl = sobel_laplace(g, (40, 60))
        assert gs == pytest.approx(0.0, abs=1e-12)
        assert gl == pytest.approx(8 * height, rel=1e-9)

    def test_border_raises(self):
        g = flat_grid()
        with pytest.raises(ValueError, match="no neighborhood"):
            sobel_laplace(g, (0, 50))
        with pytest.raises(ValueError, match="no neighborhood"):
            sobel_laplace(g, (50, 99))

    def test_unknown_imputed_with_ground(self):
        # lone point at ground level in an unknown field: no gradient
        g = build_grid(np.array([[0.05, 0.05, 0.0]]), RobotState(0, 0, 0), CFG)
        ix, iy = g.world_to_cell(0.05, 0.05)
        gs, gl = sobel_laplace(g, (ix, iy))
        assert gs == 0.0 and gl == 0.0


class TestObstacleMask:
    def test_flat_field_empty_mask(self):
        g = obstacle_mask(flat_grid(0.3), TraversabilityThresholds())
        assert not g.obstacle_mask.any()

    def test_box_masks_boundary(self):
        g = flat_grid()
        field = np.zeros((100, 100))
        field[45:55, 45:55] = 1.0
        g = replace(g, elevation=field)
        th = TraversabilityThresholds(s_max=1.0, l_max=1.0, h_max=0.2)
        masked = obstacle_mask(g, th)
        mask = masked.obstacle_mask
        assert mask[44:46, 50].any()  # west edge band
        assert mask[54:56, 50].any()  # east edge band
        assert not mask[50, 50]  # flat interior
        assert not mask[10, 10]  # far field
        # oracle: direct evaluation of the three tests per cell
        for ix in range(1, 99):
            for iy in range(1, 99):
                gs, gl = sobel_laplace(g, (ix, iy))
                block = field[ix - 1 : ix + 2, iy - 1 : iy + 2]
                h_step = np.max(np.abs(block - field[ix, iy]))
                expected = gs > th.s_max or gl > th.l_max or h_step > th.h_max
                assert mask[ix, iy] == expected, (ix, iy)

    def test_gentle_ramp_unmasked(self):
        g = flat_grid()
        c = 0.01  # g_s = 0.08, steps 0.01
        ramp = np.tile(c * np.arange(100)[:, None], (1, 100))
        g = replace(g, elevation=ramp)
        th = TraversabilityThresholds(s_max=1.0, l_max=1.0, h_max=0.2)
        assert not obstacle_mask(g, th).obstacle_mask.any()

    def test_monotone_in_thresholds(self):
        rng = np.random.default_rng(5)
        g = flat_grid()
        field = rng.uniform(0, 0.4, size=(100, 100))
        g = replace(g, elevation=field)
        loose = obstacle_mask(g, TraversabilityThresholds(2.0, 2.0, 0.5)).obstacle_mask
        tight = obstacle_mask(g, TraversabilityThresholds(1.0, 1.0, 0.2)).obstacle_mask
        assert np.all(tight | ~loose)  # loose mask is a subset of tight mask

    def test_translation_equivariance(self):
        rng = np.random.default_rng(11)
        pts = np.column_stack(
            [
                rng.uniform(-4, 4, 300),
                rng.uniform(-4, 4, 300),
                rng.uniform(0, 1.0, 300),
            ]
        )
        th = TraversabilityThresholds()
        g1 = obstacle_mask(build_grid(pts, RobotState(0, 0, 0), CFG), th)
        shift = np.array([1.3, -0.7, 0.0])  # multiples of resolution
        g2 = obstacle_mask(
            build_grid(pts + shift, RobotState(1.3, -0.7, 0.0), CFG), th
        )
        assert np.array_equal(g1.obstacle_mask, g2.obstacle_mask)

    def test_per_cell_matches_vectorized(self):
        rng = np.random.default_rng(13)
        g = flat_grid()
        field = rng.uniform(0, 0.5, size=(100, 100))
        g = replace(g, elevation=field)
        th = TraversabilityThresholds(0.8, 1.2, 0.25)
        mask = obstacle_mask(g, th).obstacle_mask
        for ix, iy in [(1, 1), (50, 50), (98, 98), (25, 73), (72, 13)]:
            gs, gl = sobel_laplace(g, (ix, iy))
            block = field[ix - 1 : ix + 2, iy - 1 : iy + 2]
            h_step = np.max(np.abs(block - field[ix, iy]))
            expected = gs > th.s_max or gl > th.l_max or h_step > th.h_max
            assert mask[ix, iy] == expected

    def test_masked_cell_centers_world_coords(self):
        g = flat_grid()
        field = np.zeros((100, 100))
        field[50, 50] = 1.0
        g = replace(g, elevation=field)
        masked = obstacle_mask(g, TraversabilityThresholds())
        centers = masked.masked_cell_centers()
        assert len(centers) > 0
        assert np.all(np.abs(centers) < 0.35)  # all near the spike at origin
