"""Autonomous excavation planning and simulation toolkit."""

from .errors import DigPlanError, DumpDeadlock, GridError, InfeasiblePlan, PathNotFound
from .grid import (
    ELEVATION,
    EXCAVATION_MASK,
    Footprint,
    LayeredGrid,
    MaskValue,
    ORIGINAL_ELEVATION,
    PolygonSpec,
    TARGET_ELEVATION,
    empty_grid,
    load_site,
    rasterize_polygons,
    save_site,
)

__version__ = "0.1.0"

__all__ = [
    "DigPlanError",
    "DumpDeadlock",
    "ELEVATION",
    "EXCAVATION_MASK",
    "Footprint",
    "GridError",
    "InfeasiblePlan",
    "LayeredGrid",
    "MaskValue",
    "ORIGINAL_ELEVATION",
    "PathNotFound",
    "PolygonSpec",
    "TARGET_ELEVATION",
    "empty_grid",
    "load_site",
    "rasterize_polygons",
    "save_site",
]
