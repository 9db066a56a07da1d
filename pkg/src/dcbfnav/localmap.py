"""Robot-centered 2.5D elevation grid and traversability masking.

A point cloud is cropped to a square window around the robot and binned
into a grid of per-cell maximum elevations. Cells are flagged as
obstacles when the Sobel gradient magnitude, the Laplacian response, or
the step height to any 8-neighbor exceeds its limit.

Unknown cells (no points) are imputed with the robot ground elevation
for convolution so unseen regions do not trigger spurious gradients.
Border cells lack a full 3x3 neighborhood and are never masked.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Tuple

import numpy as np
from scipy import ndimage

from dcbfnav.geometry import RobotState

SOBEL_X = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])
SOBEL_Y = SOBEL_X.T.copy()
# 8-connected Laplacian, matching the 8-neighborhood used for step height
LAPLACE = np.array([[1.0, 1.0, 1.0], [1.0, -8.0, 1.0], [1.0, 1.0, 1.0]])


@dataclass
class MapConfig:
    """Local window geometry and the z crop of the passthrough filter."""

    size: float = 10.0
    resolution: float = 0.1
    z_min: float = -0.5
    z_max: float = 2.5
    ground_z: float = 0.0

    def __post_init__(self) -> None:
        if self.resolution <= 0.0:
            raise ValueError("resolution must be positive")
        if self.size <= self.resolution:
            raise ValueError("map size must exceed one cell")

    @property
    def cells(self) -> int:
        return int(round(self.size / self.resolution))


@dataclass
class TraversabilityThresholds:
    """Operating limits: Sobel gradient, Laplacian response, step height."""

    s_max: float = 1.0
    l_max: float = 1.0
    h_max: float = 0.2

    def __post_init__(self) -> None:
        if min(self.s_max, self.l_max, self.h_max) <= 0.0:
            raise ValueError("all traversability limits must be positive")


@dataclass(eq=False)
class ElevationGrid:
    """Square elevation grid centered on the robot.

    ``elevation[ix, iy]`` is the max point height in the cell, NaN when
    unknown. Arrays are made read-only after construction; treat the grid
    as an immutable value.
    """

    origin: Tuple[float, float]
    resolution: float
    width: int
    height: int
    elevation: np.ndarray
    ground_z: float = 0.0
    obstacle_mask: Optional[np.ndarray] = None

    def world_to_cell(self, x: float, y: float) -> Tuple[int, int]:
        half_w = 0.5 * self.width * self.resolution
        half_h = 0.5 * self.height * self.resolution
        ix = int(math.floor((x - (self.origin[0] - half_w)) / self.resolution))
        iy = int(math.floor((y - (self.origin[1] - half_h)) / self.resolution))
        return ix, iy

    def cell_center(self, ix: int, iy: int) -> Tuple[float, float]:
        half_w = 0.5 * self.width * self.resolution
        half_h = 0.5 * self.height * self.resolution
        x = self.origin[0] - half_w + (ix + 0.5) * self.resolution
        y = self.origin[1] - half_h + (iy + 0.5) * self.resolution
        return x, y

    def in_bounds(self, ix: int, iy: int) -> bool:
        return 0 <= ix < self.width and 0 <= iy < self.height

    def filled_elevation(self) -> np.ndarray:
        """Elevation with unknown cells imputed to the ground plane."""
        filled = np.where(np.isnan(self.elevation), self.ground_z, self.elevation)
        return filled

    def masked_cell_centers(self) -> np.ndarray:
        """World coordinates of masked cells, shape (n, 2)."""
        if self.obstacle_mask is None:
            raise ValueError("obstacle mask not computed")
        ii, jj = np.nonzero(self.obstacle_mask)
        half_w = 0.5 * self.width * self.resolution
        half_h = 0.5 * self.height * self.resolution
        x = self.origin[0] - half_w + (ii + 0.5) * self.resolution
        y = self.origin[1] - half_h + (jj + 0.5) * self.resolution
        return np.column_stack([x, y])


def build_grid(points, robot_pose: RobotState, config: MapConfig) -> ElevationGrid:
    """Bin a point cloud into a robot-centered elevation grid.

    Points outside the local window (or the z crop) are discarded; each
    cell keeps the maximum z of its points; cells with no points are NaN.
    An empty point set yields an all-unknown grid.
    """
    n = config.cells
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    half = 0.5 * n * config.resolution
    ox, oy = robot_pose.x, robot_pose.y

    elev = np.full((n, n), -np.inf)
    if len(pts):
        keep = (
            np.isfinite(pts).all(axis=1)
            & (pts[:, 2] >= config.z_min)
            & (pts[:, 2] <= config.z_max)
        )
        pts = pts[keep]
        ix = np.floor((pts[:, 0] - (ox - half)) / config.resolution).astype(int)
        iy = np.floor((pts[:, 1] - (oy - half)) / config.resolution).astype(int)
        inside = (ix >= 0) & (ix < n) & (iy >= 0) & (iy < n)
        np.maximum.at(elev, (ix[inside], iy[inside]), pts[inside, 2])

    elev[~np.isfinite(elev)] = np.nan
    elev.setflags(write=False)
    return ElevationGrid(
        origin=(ox, oy),
        resolution=config.resolution,
        width=n,
        height=n,
        elevation=elev,
        ground_z=config.ground_z,
    )


def sobel_laplace(grid: ElevationGrid, cell: Tuple[int, int]) -> Tuple[float, float]:
    """Sobel gradient magnitude and |Laplacian| at one interior cell.

    Raises ValueError for border cells (no full 3x3 neighborhood).
    """
    ix, iy = cell
    if not (1 <= ix < grid.width - 1 and 1 <= iy < grid.height - 1):
        raise ValueError(f"no neighborhood: cell {cell} lies on the grid border")
    m = grid.filled_elevation()[ix - 1 : ix + 2, iy - 1 : iy + 2]
    gx = float(np.sum(SOBEL_X * m))
    gy = float(np.sum(SOBEL_Y * m))
    gl = float(abs(np.sum(LAPLACE * m)))
    return math.hypot(gx, gy), gl


def _convolve_interior(filled: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(g_s, g_l, h_step) over the full grid; border values are unspecified."""
    gx = ndimage.correlate(filled, SOBEL_X, mode="nearest")
    gy = ndimage.correlate(filled, SOBEL_Y, mode="nearest")
    gs = np.hypot(gx, gy)
    gl = np.abs(ndimage.correlate(filled, LAPLACE, mode="nearest"))

    h_step = np.zeros_like(filled)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di == 0 and dj == 0:
                continue
            shifted = np.roll(np.roll(filled, di, axis=0), dj, axis=1)
            np.maximum(h_step, np.abs(filled - shifted), out=h_step)
    return gs, gl, h_step


def obstacle_mask(grid: ElevationGrid, th: TraversabilityThresholds) -> ElevationGrid:
    """Grid with the obstacle mask filled.

    A cell is masked iff any of the three tests exceeds its limit. The
    step height is the max absolute elevation difference to the 8
    adjacent cells. Border cells are never masked.
    """
    filled = grid.filled_elevation()
    gs, gl, h_step = _convolve_interior(filled)
    mask = (gs > th.s_max) | (gl > th.l_max) | (h_step > th.h_max)
    mask[0, :] = mask[-1, :] = False
    mask[:, 0] = mask[:, -1] = False
    mask = mask.astype(bool)
    mask.setflags(write=False)
    return replace(grid, obstacle_mask=mask)
