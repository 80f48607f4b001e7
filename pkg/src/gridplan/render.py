"""World rasters: the predicted map and walls/doors drawn over the source map."""
from __future__ import annotations

import numpy as np

from gridplan.geometry import PredictedClass, rasterize
from gridplan.grid_io import (
    OVERLAY_DOOR,
    OVERLAY_WALL,
    PALETTE_DOOR,
    PALETTE_FREE,
    PALETTE_OCCUPIED,
    PALETTE_UNEXPLAINED,
    ClassifiedGrid,
    OccupancyGrid,
    class_colors,
)
from gridplan.world import World

_WORLD_LUT = np.array([PALETTE_OCCUPIED, PALETTE_UNEXPLAINED, PALETTE_FREE, PALETTE_DOOR], dtype=np.uint8)


def render_world(world: World, width: int, height: int) -> np.ndarray:
    """RGB image: wall black, unknown gray, free white, door light gray."""
    return _WORLD_LUT[rasterize(world, width, height).classes]


def render_overlay(grid: OccupancyGrid | ClassifiedGrid, world: World) -> np.ndarray:
    """Walls and doors painted over the map.

    The background is the source grayscale for an occupancy grid, or the
    class palette for a classified grid.
    """
    if isinstance(grid, ClassifiedGrid):
        rgb = class_colors(grid).copy()
    else:
        rgb = np.repeat(grid.intensities[:, :, None], 3, axis=2).copy()
    cls = rasterize(world, grid.width, grid.height).classes
    rgb[cls == PredictedClass.WALL] = OVERLAY_WALL
    rgb[cls == PredictedClass.DOOR] = OVERLAY_DOOR
    return rgb
