"""Layered 2.5D raster maps: the substrate all planners read and the simulator writes.

A grid is a set of named dense scalar fields sharing one georeferenced
raster. Cell (row, col) has its center at
``origin + (col * resolution, row * resolution)``; rows follow +y, columns
follow +x. Missing data is NaN, never 0 (elevation 0 is legal).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path

import numpy as np
import shapely
from scipy import ndimage
from shapely.geometry import Polygon as ShapelyPolygon

from .errors import GridError

# Canonical layer names.
ELEVATION = "elevation"
TARGET_ELEVATION = "target_elevation"
ORIGINAL_ELEVATION = "original_elevation"
EXCAVATION_MASK = "excavation_mask"
OCCUPANCY = "occupancy"

DEFAULT_RESOLUTION = 0.1


class MaskValue(IntEnum):
    """Per-cell excavation-mask label; stored on disk as its integer value."""

    DIG = 0
    PERMANENT_DUMP = 1
    NEUTRAL = 2
    NO_GO = 3
    BOUNDARY = 4


@dataclass
class Footprint:
    """Oriented rectangle approximating the machine base on the ground."""

    center: tuple[float, float]
    heading: float
    half_length: float
    half_width: float

    def __post_init__(self):
        if self.half_length <= 0 or self.half_width <= 0:
            raise ValueError("footprint half-extents must be positive")

    def corners(self) -> np.ndarray:
        """Four corners (4, 2) in world coordinates, counter-clockwise."""
        c, s = math.cos(self.heading), math.sin(self.heading)
        local = np.array(
            [
                [self.half_length, self.half_width],
                [-self.half_length, self.half_width],
                [-self.half_length, -self.half_width],
                [self.half_length, -self.half_width],
            ]
        )
        rot = np.array([[c, -s], [s, c]])
        return local @ rot.T + np.asarray(self.center)

    def covered_cells(self, grid: "LayeredGrid") -> tuple[np.ndarray, np.ndarray]:
        """Indices (rows, cols) of grid cells whose centers lie inside the rectangle."""
        res = grid.resolution
        ox, oy = grid.origin
        rad = math.hypot(self.half_length, self.half_width)
        cx, cy = self.center
        c0 = max(0, int(math.floor((cx - rad - ox) / res)))
        c1 = min(grid.cols - 1, int(math.ceil((cx + rad - ox) / res)))
        r0 = max(0, int(math.floor((cy - rad - oy) / res)))
        r1 = min(grid.rows - 1, int(math.ceil((cy + rad - oy) / res)))
        if c1 < c0 or r1 < r0:
            return np.empty(0, dtype=int), np.empty(0, dtype=int)
        cols = np.arange(c0, c1 + 1)
        rows = np.arange(r0, r1 + 1)
        xs = ox + cols * res
        ys = oy + rows * res
        gx, gy = np.meshgrid(xs, ys)
        dx = gx - cx
        dy = gy - cy
        ch, sh = math.cos(self.heading), math.sin(self.heading)
        u = dx * ch + dy * sh
        v = -dx * sh + dy * ch
        inside = (np.abs(u) <= self.half_length) & (np.abs(v) <= self.half_width)
        rr, cc = np.nonzero(inside)
        return rows[rr], cols[cc]


@dataclass
class PolygonSpec:
    """One source polygon: a simple ring painting `value` into `layer`."""

    ring: list[tuple[float, float]]
    layer: str
    value: float


@dataclass
class LayeredGrid:
    resolution: float
    origin: tuple[float, float]
    layers: dict[str, np.ndarray] = field(default_factory=dict)
    crs: str = "local"
    source_polygons: list[PolygonSpec] = field(default_factory=list)

    def __post_init__(self):
        if self.resolution <= 0:
            raise GridError("resolution must be positive")
        dims = {a.shape for a in self.layers.values()}
        if len(dims) > 1:
            raise GridError(f"layers disagree on dims: {sorted(dims)}")

    @property
    def dims(self) -> tuple[int, int]:
        arr = next(iter(self.layers.values()))
        return arr.shape

    @property
    def rows(self) -> int:
        return self.dims[0]

    @property
    def cols(self) -> int:
        return self.dims[1]

    def copy(self) -> "LayeredGrid":
        return LayeredGrid(
            self.resolution,
            self.origin,
            {k: v.copy() for k, v in self.layers.items()},
            self.crs,
            list(self.source_polygons),
        )

    def cell_area(self) -> float:
        return self.resolution * self.resolution

    def world_to_cell(self, x: float, y: float) -> tuple[int, int]:
        col = int(round((x - self.origin[0]) / self.resolution))
        row = int(round((y - self.origin[1]) / self.resolution))
        return row, col

    def cell_to_world(self, row, col):
        return (
            self.origin[0] + np.asarray(col) * self.resolution,
            self.origin[1] + np.asarray(row) * self.resolution,
        )

    def in_bounds(self, row: int, col: int) -> bool:
        return 0 <= row < self.rows and 0 <= col < self.cols

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Meshgrid (xs, ys) of all cell centers, each shaped like a layer."""
        xs = self.origin[0] + np.arange(self.cols) * self.resolution
        ys = self.origin[1] + np.arange(self.rows) * self.resolution
        return np.meshgrid(xs, ys)

    def mask(self) -> np.ndarray:
        return self.layers[EXCAVATION_MASK]


def empty_grid(resolution, origin, dims, layer_names=(ELEVATION,)) -> LayeredGrid:
    layers = {name: np.full(dims, np.nan) for name in layer_names}
    return LayeredGrid(resolution, origin, layers)


def rasterize_polygons(
    polygons: list[PolygonSpec],
    resolution: float,
    origin: tuple[float, float],
    dims: tuple[int, int],
    layer_names: tuple[str, ...] = (ELEVATION, TARGET_ELEVATION, EXCAVATION_MASK, OCCUPANCY),
) -> LayeredGrid:
    """Paint polygons onto a fresh grid using cell-center containment.

    Later polygons win on overlap. Uncovered mask cells default to Neutral,
    uncovered occupancy to free (0). Self-intersecting rings are rejected.
    """
    if resolution <= 0 or dims[0] <= 0 or dims[1] <= 0:
        raise GridError("invalid grid spec")
    grid = empty_grid(resolution, origin, dims, layer_names)
    if EXCAVATION_MASK in grid.layers:
        grid.layers[EXCAVATION_MASK][:] = MaskValue.NEUTRAL
    if OCCUPANCY in grid.layers:
        grid.layers[OCCUPANCY][:] = 0.0
    gx, gy = grid.cell_centers()
    for idx, spec in enumerate(polygons):
        poly = ShapelyPolygon(spec.ring)
        if not poly.is_valid or poly.area <= 0:
            raise GridError(f"polygon {idx} is not a simple ring")
        if spec.layer not in grid.layers:
            raise GridError(f"polygon {idx} targets unknown layer {spec.layer!r}")
        minx, miny, maxx, maxy = poly.bounds
        c0 = max(0, int(math.floor((minx - origin[0]) / resolution)))
        c1 = min(dims[1] - 1, int(math.ceil((maxx - origin[0]) / resolution)))
        r0 = max(0, int(math.floor((miny - origin[1]) / resolution)))
        r1 = min(dims[0] - 1, int(math.ceil((maxy - origin[1]) / resolution)))
        if c1 < c0 or r1 < r0:
            continue
        sub_x = gx[r0 : r1 + 1, c0 : c1 + 1]
        sub_y = gy[r0 : r1 + 1, c0 : c1 + 1]
        inside = shapely.contains_xy(poly, sub_x.ravel(), sub_y.ravel()).reshape(sub_x.shape)
        grid.layers[spec.layer][r0 : r1 + 1, c0 : c1 + 1][inside] = spec.value
    grid.source_polygons = list(polygons)
    return grid


def signed_distance(grid: LayeredGrid, values) -> np.ndarray:
    """Distance field (m) to the nearest mask cell whose value is in `values`.

    Zero inside the satisfying set; exact cell-center Euclidean distances.
    An empty satisfying set yields an all-infinite field.
    """
    mask_layer = grid.layers[EXCAVATION_MASK]
    if callable(values):
        sat = values(mask_layer)
    else:
        sat = np.isin(mask_layer, [int(v) for v in np.atleast_1d(list(values))])
    if not sat.any():
        return np.full(grid.dims, np.inf)
    return ndimage.distance_transform_edt(~sat, sampling=grid.resolution)


def distance_field(target: np.ndarray, resolution: float) -> np.ndarray:
    """Distance (m) to the nearest True cell of a boolean raster."""
    if not target.any():
        return np.full(target.shape, np.inf)
    return ndimage.distance_transform_edt(~target, sampling=resolution)


def volume_between(grid: LayeredGrid, layer_a: str, layer_b: str, region=None) -> float:
    """Signed volume (m^3) of (a - b) over the region mask."""
    a = grid.layers[layer_a]
    b = grid.layers[layer_b]
    if region is None:
        region = np.ones(grid.dims, dtype=bool)
    diff = a[region] - b[region]
    bad = ~np.isfinite(diff)
    if bad.any():
        rr, cc = np.nonzero(region)
        offenders = list(zip(rr[bad][:10].tolist(), cc[bad][:10].tolist()))
        raise GridError(f"non-finite cells inside region: {offenders}")
    return float(diff.sum() * grid.cell_area())


def fill_holes(grid: LayeredGrid, layer: str) -> LayeredGrid:
    """Replace NaN cells by the mean of their finite 8-neighbors, iterating to a fixpoint."""
    arr = grid.layers[layer]
    if not np.isfinite(arr).any():
        raise GridError(f"layer {layer!r} has no finite data to fill from")
    out = arr.copy()
    while True:
        holes = ~np.isfinite(out)
        if not holes.any():
            break
        padded = np.pad(out, 1, constant_values=np.nan)
        nb_sum = np.zeros_like(out)
        nb_cnt = np.zeros_like(out)
        for dr in (-1, 0, 1):
            for dc in (-1, 0, 1):
                if dr == 0 and dc == 0:
                    continue
                shifted = padded[1 + dr : 1 + dr + out.shape[0], 1 + dc : 1 + dc + out.shape[1]]
                finite = np.isfinite(shifted)
                nb_sum[finite] += shifted[finite]
                nb_cnt += finite
        fillable = holes & (nb_cnt > 0)
        if not fillable.any():
            break
        out[fillable] = nb_sum[fillable] / nb_cnt[fillable]
    result = grid.copy()
    result.layers[layer] = out
    return result


# --- Site file format -------------------------------------------------------
#
# A site is a directory with:
#   site.meta        resolution, origin, dims, layer names, CRS tag (text)
#   <layer>.raw      row-major little-endian float64 raster, one per layer
#   polygons.geojson source polygons kept for provenance


def save_site(grid: LayeredGrid, path) -> None:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    names = sorted(grid.layers)
    meta = [
        f"resolution: {grid.resolution!r}",
        f"origin: {grid.origin[0]!r} {grid.origin[1]!r}",
        f"dims: {grid.rows} {grid.cols}",
        f"layers: {','.join(names)}",
        f"crs: {grid.crs}",
    ]
    (path / "site.meta").write_text("\n".join(meta) + "\n")
    for name in names:
        data = np.ascontiguousarray(grid.layers[name], dtype="<f8")
        (path / f"{name}.raw").write_bytes(data.tobytes())
    features = [
        {
            "type": "Feature",
            "properties": {"layer": p.layer, "value": p.value},
            "geometry": {"type": "Polygon", "coordinates": [[list(pt) for pt in p.ring]]},
        }
        for p in grid.source_polygons
    ]
    gj = {"type": "FeatureCollection", "features": features}
    (path / "polygons.geojson").write_text(json.dumps(gj, indent=1, sort_keys=True))


def load_site(path) -> LayeredGrid:
    path = Path(path)
    meta = {}
    for line in (path / "site.meta").read_text().splitlines():
        if not line.strip():
            continue
        key, _, value = line.partition(":")
        meta[key.strip()] = value.strip()
    resolution = float(meta["resolution"])
    ox, oy = (float(t) for t in meta["origin"].split())
    rows, cols = (int(t) for t in meta["dims"].split())
    names = [n for n in meta["layers"].split(",") if n]
    layers = {}
    for name in names:
        raw = (path / f"{name}.raw").read_bytes()
        layers[name] = np.frombuffer(raw, dtype="<f8").reshape(rows, cols).copy()
    polys = []
    gj_path = path / "polygons.geojson"
    if gj_path.exists():
        gj = json.loads(gj_path.read_text())
        for feat in gj.get("features", []):
            ring = [tuple(pt) for pt in feat["geometry"]["coordinates"][0]]
            polys.append(PolygonSpec(ring, feat["properties"]["layer"], feat["properties"]["value"]))
    return LayeredGrid(resolution, (ox, oy), layers, meta.get("crs", "local"), polys)
