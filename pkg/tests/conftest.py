"""Shared fixtures and grid-building helpers."""

import numpy as np
import pytest

from digplan.grid import (
    ELEVATION,
    EXCAVATION_MASK,
    MaskValue,
    ORIGINAL_ELEVATION,
    TARGET_ELEVATION,
    empty_grid,
)
from digplan.local import USER_MASK

ALL_LAYERS = (ELEVATION, TARGET_ELEVATION, ORIGINAL_ELEVATION, EXCAVATION_MASK, USER_MASK)


def make_grid(width, height, resolution=0.1, origin=(0.0, 0.0)):
    """Flat all-Neutral site of the given extent in meters."""
    dims = (int(round(height / resolution)), int(round(width / resolution)))
    grid = empty_grid(resolution, origin, dims, ALL_LAYERS)
    grid.layers[ELEVATION][:] = 0.0
    grid.layers[ORIGINAL_ELEVATION][:] = 0.0
    grid.layers[TARGET_ELEVATION][:] = np.nan
    grid.layers[EXCAVATION_MASK][:] = MaskValue.NEUTRAL
    grid.layers[USER_MASK][:] = MaskValue.NEUTRAL
    return grid


def rect_mask(grid, x0, x1, y0, y1):
    gx, gy = grid.cell_centers()
    return (gx >= x0) & (gx <= x1) & (gy >= y0) & (gy <= y1)


def mark_dig(grid, region, depth=1.0):
    grid.layers[TARGET_ELEVATION][region] = grid.layers[ELEVATION][region] - depth
    grid.layers[EXCAVATION_MASK][region] = MaskValue.DIG
    grid.layers[USER_MASK][region] = MaskValue.DIG


def make_pit_site():
    """The deployment-style pit: 15.6 x 11.5 m, 1 m deep, permanent dump ring."""
    grid = make_grid(36.0, 40.0, 0.1)
    dig = rect_mask(grid, 12.2, 27.8, 12.25, 23.75)
    mark_dig(grid, dig, depth=1.0)
    ring = rect_mask(grid, 8.0, 32.0, 8.0, 28.0) & ~rect_mask(grid, 11.0, 29.0, 11.0, 25.0)
    grid.layers[USER_MASK][ring] = MaskValue.PERMANENT_DUMP
    grid.layers[EXCAVATION_MASK][ring] = MaskValue.PERMANENT_DUMP
    return grid, dig


@pytest.fixture(scope="session")
def pit_site():
    return make_pit_site()


# one line per acceptance criterion, echoed after the test summary
CRITERION_LINES = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    for line in CRITERION_LINES:
        terminalreporter.write_line(line)
