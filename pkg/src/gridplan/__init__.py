"""Semantic floor plans (rooms, typed walls, doors) from occupancy grids via DDMCMC."""

from gridplan.geometry import Rect, Segment, CellIndex, PredictedClass, PredictedGrid, rasterize
from gridplan.grid_io import (
    CellClass,
    ClassifiedGrid,
    ClassifierThresholds,
    OccupancyGrid,
    classify,
    load_grid,
)
from gridplan.world import Door, Room, WallType, World

__version__ = "0.1.0"

__all__ = [
    "CellClass",
    "CellIndex",
    "ClassifiedGrid",
    "ClassifierThresholds",
    "Door",
    "OccupancyGrid",
    "PredictedClass",
    "PredictedGrid",
    "Rect",
    "Room",
    "Segment",
    "WallType",
    "World",
    "classify",
    "load_grid",
    "rasterize",
]
