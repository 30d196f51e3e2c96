"""Procedural excavation benchmark: task generation and plan scoring.

Tasks are built from random orthogonal building silhouettes (unions of
axis-aligned rectangles, optionally with 45-degree corner cuts) in five
flavors: dig the building, dig everything around it (obstacle solid or
traversable), dig several buildings at once, or dig the street space
between several buildings. Scores: path efficiency, workspace efficiency,
and dig coverage.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass

import numpy as np
import shapely
from shapely import affinity
from shapely.geometry import Polygon, box
from shapely.ops import unary_union

from .coverage.lanes import LaneParams
from .coverage.orientation import plan_site
from .errors import InfeasiblePlan
from .grid import (
    ELEVATION,
    EXCAVATION_MASK,
    LayeredGrid,
    MaskValue,
    ORIGINAL_ELEVATION,
    TARGET_ELEVATION,
    empty_grid,
)
from .local import USER_MASK, wrap_angle

FAMILIES = (
    "Foundations",
    "ExteriorFoundations",
    "ExteriorFoundationsTraversable",
    "Crops",
    "ExteriorCrops",
)

SIDE_RANGES = {
    "Foundations": (20.0, 100.0),
    "ExteriorFoundations": (20.0, 100.0),
    "ExteriorFoundationsTraversable": (20.0, 100.0),
    "Crops": (100.0, 1000.0),
    "ExteriorCrops": (100.0, 1000.0),
}

MAX_REACH = 7.5
TARGET_RASTER_SIDE = 160  # cells; resolution adapts to keep rasters near this
MAX_RESOLUTION = 2.0  # m; very large crop maps coarsen no further than this


@dataclass
class BenchTask:
    family: str
    seed: int
    side: float
    grid: LayeredGrid
    diggable: np.ndarray
    obstacle: np.ndarray
    dig_area: float


def _building(rng, side) -> Polygon:
    """Random orthogonal silhouette: 2-6 overlapping rectangles, maybe cut."""
    n = int(rng.integers(2, 7))
    rects = []
    cx, cy = side / 2.0, side / 2.0
    for _ in range(n):
        w = rng.uniform(0.25, 0.6) * side
        h = rng.uniform(0.25, 0.6) * side
        x = cx + rng.uniform(-0.2, 0.2) * side - w / 2.0
        y = cy + rng.uniform(-0.2, 0.2) * side - h / 2.0
        rects.append(box(x, y, x + w, y + h))
    poly = unary_union(rects)
    if rng.random() < 0.4:
        # 45-degree corner cut
        minx, miny, maxx, maxy = poly.bounds
        cut = rng.uniform(0.15, 0.35) * min(maxx - minx, maxy - miny)
        corner = int(rng.integers(4))
        tri = {
            0: [(minx, miny), (minx + cut, miny), (minx, miny + cut)],
            1: [(maxx, miny), (maxx - cut, miny), (maxx, miny + cut)],
            2: [(maxx, maxy), (maxx - cut, maxy), (maxx, maxy - cut)],
            3: [(minx, maxy), (minx + cut, maxy), (minx, maxy - cut)],
        }[corner]
        poly = poly.difference(Polygon(tri))
    if poly.geom_type != "Polygon":
        poly = max(poly.geoms, key=lambda g: g.area)
    return poly


def _paint(grid, poly):
    """Cell-center containment raster of a polygon."""
    gx, gy = grid.cell_centers()
    return shapely.contains_xy(poly, gx.ravel(), gy.ravel()).reshape(grid.dims)


def generate_task(family: str, seed: int, side: float | None = None) -> BenchTask:
    """Build one benchmark task; deterministic in (family, seed, side).

    The silhouette stream depends only on (seed, side), so ExteriorFoundations
    at a given seed uses the same building whose interior Foundations digs.
    Degenerate geometry falls through to the next sub-seed.
    """
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}; expected one of {FAMILIES}")
    lo, hi = SIDE_RANGES[family]
    if side is None:
        side = float(np.random.default_rng((zlib.crc32(b"side"), seed)).uniform(lo, hi))
    if not lo <= side <= hi:
        raise ValueError(f"side {side} outside {family} range [{lo}, {hi}]")

    margin = MAX_REACH + 2.0
    extent = side + 2 * margin
    resolution = min(MAX_RESOLUTION, max(0.1, extent / TARGET_RASTER_SIDE))
    dims = (int(math.ceil(extent / resolution)), int(math.ceil(extent / resolution)))
    grid = empty_grid(resolution, (0.0, 0.0), dims, (ELEVATION,))
    grid.layers[ELEVATION][:] = 0.0
    grid.layers[ORIGINAL_ELEVATION] = np.zeros(dims)
    grid.layers[TARGET_ELEVATION] = np.full(dims, np.nan)
    grid.layers[USER_MASK] = np.full(dims, float(MaskValue.NEUTRAL))
    grid.layers[EXCAVATION_MASK] = np.full(dims, float(MaskValue.NEUTRAL))

    multi = family in ("Crops", "ExteriorCrops")
    min_area = (2.0 * MAX_REACH) ** 2 / 4.0
    for attempt in range(16):
        rng = np.random.default_rng((seed, int(side * 16), attempt))
        if multi:
            polys = []
            k = int(rng.integers(5, 21))
            for _ in range(k):
                b = _building(rng, side * 0.2)
                dx = margin + rng.uniform(0.0, side * 0.8)
                dy = margin + rng.uniform(0.0, side * 0.8)
                polys.append(affinity.translate(b, xoff=dx, yoff=dy))
            buildings = unary_union(polys)
        else:
            buildings = affinity.translate(_building(rng, side), xoff=margin, yoff=margin)
        if buildings.area >= min_area:
            break
    else:
        raise ValueError(f"could not generate non-degenerate geometry for seed {seed}")

    inside = _paint(grid, buildings)
    frame = _paint(grid, box(margin, margin, margin + side, margin + side))
    obstacle = np.zeros(dims, dtype=bool)

    if family in ("Foundations", "Crops"):
        diggable = inside
    else:
        diggable = frame & ~inside
        if family != "ExteriorFoundationsTraversable":
            obstacle = inside

    user = grid.layers[USER_MASK]
    user[diggable] = MaskValue.DIG
    user[obstacle] = MaskValue.NO_GO
    grid.layers[TARGET_ELEVATION][diggable] = -1.0
    grid.layers[EXCAVATION_MASK][diggable] = MaskValue.DIG
    grid.layers[EXCAVATION_MASK][obstacle] = MaskValue.NO_GO

    dig_area = float(diggable.sum()) * grid.cell_area()
    return BenchTask(family, seed, side, grid, diggable, obstacle, dig_area)


def path_efficiency(poses, dig_area: float) -> float:
    """Summed straight-line distance between base poses over sqrt(area)."""
    if len(poses) < 2:
        return 0.0
    pts = np.asarray([(p[0], p[1]) for p in poses])
    d = np.hypot(np.diff(pts[:, 0]), np.diff(pts[:, 1])).sum()
    return float(d / math.sqrt(dig_area))


def workspace_efficiency(n_poses: int, dig_area: float) -> float:
    a_w = 0.5 * math.pi * MAX_REACH**2
    return n_poses * a_w / dig_area


def coverage_cells(task: BenchTask, poses, r_in=4.5, r_out=7.0, half_angle=0.95) -> np.ndarray:
    """Boolean raster of dig cells inside at least one pose's dig sector."""
    grid = task.grid
    res = grid.resolution
    covered = np.zeros(grid.dims, dtype=bool)
    w = int(math.ceil(r_out / res)) + 1
    for x, y, heading in poses:
        row, col = grid.world_to_cell(x, y)
        r0, r1 = max(0, row - w), min(grid.rows, row + w + 1)
        c0, c1 = max(0, col - w), min(grid.cols, col + w + 1)
        if r0 >= r1 or c0 >= c1:
            continue
        ys = grid.origin[1] + np.arange(r0, r1) * res
        xs = grid.origin[0] + np.arange(c0, c1) * res
        gx, gy = np.meshgrid(xs, ys)
        dx = gx - x
        dy = gy - y
        rr = np.hypot(dx, dy)
        bearing = wrap_angle(np.arctan2(dy, dx) - heading)
        covered[r0:r1, c0:c1] |= (rr >= r_in) & (rr <= r_out) & (np.abs(bearing) <= half_angle)
    return covered & task.diggable


def coverage_fraction_slow(task: BenchTask, poses, r_in=4.5, r_out=7.0, half_angle=0.95) -> float:
    """Cell-by-cell coverage check; cross-validates coverage_cells."""
    grid = task.grid
    rows, cols = np.nonzero(task.diggable)
    n_cov = 0
    for row, col in zip(rows, cols):
        x = grid.origin[0] + col * grid.resolution
        y = grid.origin[1] + row * grid.resolution
        for px, py, ph in poses:
            r = math.hypot(x - px, y - py)
            if r < r_in or r > r_out:
                continue
            b = wrap_angle(math.atan2(y - py, x - px) - ph)
            if abs(b) <= half_angle:
                n_cov += 1
                break
    return n_cov / max(1, len(rows))


@dataclass
class BenchScore:
    family: str
    seed: int
    side: float
    success: bool
    n_poses: int
    path_efficiency: float
    workspace_efficiency: float
    coverage: float
    dig_area: float
    error: str = ""


def score_plan(task: BenchTask, poses) -> BenchScore:
    cov = coverage_cells(task, poses)
    frac = float(cov.sum()) / max(1, int(task.diggable.sum()))
    return BenchScore(
        family=task.family,
        seed=task.seed,
        side=task.side,
        success=True,
        n_poses=len(poses),
        path_efficiency=path_efficiency(poses, task.dig_area),
        workspace_efficiency=workspace_efficiency(len(poses), task.dig_area),
        coverage=frac,
        dig_area=task.dig_area,
    )


def run_task(task: BenchTask, n_samples: int = 12) -> BenchScore:
    """Plan a task end to end and score it; failures score as unsuccessful."""
    try:
        plans, order = plan_site(
            task.grid,
            task.diggable,
            params=LaneParams(),
            obstacle_world=task.obstacle,
            n_samples=n_samples,
        )
    except InfeasiblePlan as exc:
        return BenchScore(
            task.family, task.seed, task.side, False, 0, 0.0, 0.0, 0.0, task.dig_area, str(exc)
        )
    poses = []
    for idx in order:
        poses.extend(plans[idx].poses)
    return score_plan(task, poses)


def run_benchmark(families=FAMILIES, n_tasks: int = 5, seed: int = 0, n_samples: int = 12, side=None):
    """Generate and score n_tasks per family; returns a list of BenchScore."""
    scores = []
    for family in families:
        for k in range(n_tasks):
            task = generate_task(family, seed + k, side)
            scores.append(run_task(task, n_samples))
    return scores


def summarize(scores) -> dict:
    """Per-family mean (std) of each score over successful tasks."""
    out = {}
    for family in sorted({s.family for s in scores}):
        fam = [s for s in scores if s.family == family]
        ok = [s for s in fam if s.success]
        entry = {"n": len(fam), "success_rate": len(ok) / len(fam)}
        for key in ("path_efficiency", "workspace_efficiency", "coverage"):
            vals = np.array([getattr(s, key) for s in ok]) if ok else np.zeros(0)
            entry[key + "_mean"] = float(vals.mean()) if len(vals) else 0.0
            entry[key + "_std"] = float(vals.std()) if len(vals) else 0.0
        out[family] = entry
    return out
