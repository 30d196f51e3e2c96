"""Local workspace planning at a fixed base pose.

Five zones are anchored at the base: a front digging sector, two
front-lateral sectors (dig or temporary dump), and two back sectors
(dump only). The rear corridor stays zone-free so the machine can always
retreat. The planner refreshes the excavation mask, decides which zone to
dig and which receives soil, and declares the workspace complete.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from shapely.geometry import MultiPoint

import shapely

from .errors import DumpDeadlock
from .grid import (
    ELEVATION,
    EXCAVATION_MASK,
    Footprint,
    LayeredGrid,
    MaskValue,
    ORIGINAL_ELEVATION,
    TARGET_ELEVATION,
    distance_field,
)

# Auxiliary layers maintained alongside the excavation mask.
USER_MASK = "user_mask"
FUTURE_HULL = "future_hull"
DUG = "dug"


class ZoneId(Enum):
    FRONT = "front"
    FRONT_LEFT = "front_left"
    FRONT_RIGHT = "front_right"
    BACK_LEFT = "back_left"
    BACK_RIGHT = "back_right"


DUMP_ZONES = (ZoneId.FRONT_LEFT, ZoneId.FRONT_RIGHT, ZoneId.BACK_LEFT, ZoneId.BACK_RIGHT)
LATERAL_ZONES = (ZoneId.FRONT_LEFT, ZoneId.FRONT_RIGHT)


@dataclass
class LocalGeometry:
    workspace_angle: float = 1.9
    front_r_in: float = 4.5
    front_r_out: float = 7.0
    lateral_r_in: float = 3.5
    lateral_r_out: float = 7.5
    # Angular spans of the lateral and back sectors; with the defaults the
    # rear corridor (|bearing| > 2.6 rad) stays zone-free.
    lateral_span: float = 1.0
    back_span: float = 0.65

    def __post_init__(self):
        if self.front_r_in >= self.front_r_out:
            raise ValueError("front inner radius must be below outer radius")
        if self.lateral_r_in >= self.lateral_r_out:
            raise ValueError("lateral inner radius must be below outer radius")

    @property
    def half_front(self) -> float:
        return self.workspace_angle / 2.0

    @property
    def max_reach(self) -> float:
        return max(self.front_r_out, self.lateral_r_out)

    def zone_bounds(self, zone: ZoneId) -> tuple[float, float, float, float]:
        """(r_in, r_out, bearing_min, bearing_max) of a zone, bearing relative to heading."""
        h = self.half_front
        if zone is ZoneId.FRONT:
            return self.front_r_in, self.front_r_out, -h, h
        if zone is ZoneId.FRONT_LEFT:
            return self.lateral_r_in, self.lateral_r_out, h, h + self.lateral_span
        if zone is ZoneId.FRONT_RIGHT:
            return self.lateral_r_in, self.lateral_r_out, -h - self.lateral_span, -h
        lo = h + self.lateral_span
        if zone is ZoneId.BACK_LEFT:
            return self.lateral_r_in, self.lateral_r_out, lo, lo + self.back_span
        return self.lateral_r_in, self.lateral_r_out, -lo - self.back_span, -lo


@dataclass
class CompletionThresholds:
    deviation_height: float = 0.1
    deviation_fraction: float = 0.10
    volume_fraction: float = 0.08
    dig_height: float = 0.05  # height above target that marks a cell diggable


def wrap_angle(a):
    return (np.asarray(a) + math.pi) % (2 * math.pi) - math.pi


def zone_cells(grid: LayeredGrid, pose, geometry: LocalGeometry, zone: ZoneId):
    """Grid cell indices (rows, cols) inside one zone sector."""
    x0, y0, heading = pose
    r_in, r_out, b_min, b_max = geometry.zone_bounds(zone)
    res = grid.resolution
    c0 = max(0, int(math.floor((x0 - r_out - grid.origin[0]) / res)))
    c1 = min(grid.cols - 1, int(math.ceil((x0 + r_out - grid.origin[0]) / res)))
    r0 = max(0, int(math.floor((y0 - r_out - grid.origin[1]) / res)))
    r1 = min(grid.rows - 1, int(math.ceil((y0 + r_out - grid.origin[1]) / res)))
    if c1 < c0 or r1 < r0:
        return np.empty(0, dtype=int), np.empty(0, dtype=int)
    cols = np.arange(c0, c1 + 1)
    rows = np.arange(r0, r1 + 1)
    gx, gy = np.meshgrid(grid.origin[0] + cols * res, grid.origin[1] + rows * res)
    dx = gx - x0
    dy = gy - y0
    rr = np.hypot(dx, dy)
    bearing = wrap_angle(np.arctan2(dy, dx) - heading)
    inside = (rr >= r_in) & (rr <= r_out) & (bearing > b_min) & (bearing <= b_max)
    ri, ci = np.nonzero(inside)
    return rows[ri], cols[ci]


@dataclass
class ZoneState:
    zone: ZoneId
    rows: np.ndarray
    cols: np.ndarray
    planned_volume: float = 0.0
    refined_passes: int = 0


@dataclass
class LocalWorkspace:
    """Zones frozen at one base pose, with the volume snapshot taken at init."""

    pose: tuple[float, float, float]
    geometry: LocalGeometry
    thresholds: CompletionThresholds
    zones: dict[ZoneId, ZoneState] = field(default_factory=dict)
    last_dig_point: tuple[float, float] | None = None


def init_workspace(
    grid: LayeredGrid,
    pose,
    geometry: LocalGeometry | None = None,
    thresholds: CompletionThresholds | None = None,
) -> LocalWorkspace:
    geometry = geometry or LocalGeometry()
    thresholds = thresholds or CompletionThresholds()
    ws = LocalWorkspace(tuple(pose), geometry, thresholds)
    for zone in ZoneId:
        rows, cols = zone_cells(grid, pose, geometry, zone)
        state = ZoneState(zone, rows, cols)
        state.planned_volume = _remaining_volume(grid, state)
        ws.zones[zone] = state
    return ws


def _dig_targets(grid: LayeredGrid, state: ZoneState):
    """Per-cell (relevant, excess-height) arrays for a zone's digging task.

    Front digs user Dig cells against the target elevation; laterals dig
    soil piled above the original ground on non-permanent-dump cells. Back
    zones never dig.
    """
    if len(state.rows) == 0:
        return None, None
    user = grid.layers[USER_MASK][state.rows, state.cols]
    elev = grid.layers[ELEVATION][state.rows, state.cols]
    if state.zone is ZoneId.FRONT:
        relevant = user == MaskValue.DIG
        target = grid.layers[TARGET_ELEVATION][state.rows, state.cols]
        excess = elev - target
    elif state.zone in LATERAL_ZONES:
        relevant = (user != MaskValue.PERMANENT_DUMP) & (user != MaskValue.NO_GO)
        target = grid.layers[ORIGINAL_ELEVATION][state.rows, state.cols]
        excess = elev - target
    else:
        return None, None
    excess = np.where(relevant, excess, 0.0)
    excess = np.where(np.isfinite(excess), excess, 0.0)
    return relevant, excess


def _remaining_volume(grid: LayeredGrid, state: ZoneState) -> float:
    relevant, excess = _dig_targets(grid, state)
    if relevant is None:
        return 0.0
    return float(np.clip(excess, 0.0, None).sum() * grid.cell_area())


def deviation_fraction(grid: LayeredGrid, state: ZoneState, thresholds: CompletionThresholds) -> float:
    relevant, excess = _dig_targets(grid, state)
    if relevant is None or not relevant.any():
        return 0.0
    deviating = excess[relevant] > thresholds.deviation_height
    return float(deviating.mean())


def zone_complete(grid: LayeredGrid, ws: LocalWorkspace, zone: ZoneId) -> bool:
    """A dig zone is complete when few cells deviate or little volume remains."""
    state = ws.zones[zone]
    relevant, _ = _dig_targets(grid, state)
    if relevant is None or not relevant.any():
        return True
    th = ws.thresholds
    if deviation_fraction(grid, state, th) < th.deviation_fraction:
        return True
    remaining = _remaining_volume(grid, state)
    if state.planned_volume <= 0:
        return True
    return remaining < th.volume_fraction * state.planned_volume


def usable_dump_cells(grid: LayeredGrid, state: ZoneState, min_permanent_area: float = 1.5):
    """Member cells a deposit may be centered on.

    Excludes undug Dig, Boundary, NoGo, already-dug ground, and anything
    under the convex hull of future base footprints. When the zone holds
    enough permanent-dump ground, only those cells are offered: soil placed
    on neutral ground is temporary and would have to be re-handled later.
    """
    if len(state.rows) == 0:
        return np.empty(0, dtype=int), np.empty(0, dtype=int)
    mask = grid.layers[EXCAVATION_MASK][state.rows, state.cols]
    ok = (mask == MaskValue.NEUTRAL) | (mask == MaskValue.PERMANENT_DUMP)
    if FUTURE_HULL in grid.layers:
        ok &= grid.layers[FUTURE_HULL][state.rows, state.cols] == 0
    if DUG in grid.layers:
        ok &= grid.layers[DUG][state.rows, state.cols] == 0
    perm = ok & (mask == MaskValue.PERMANENT_DUMP)
    if perm.sum() * grid.cell_area() >= min_permanent_area:
        ok = perm
    return state.rows[ok], state.cols[ok]


def dump_cost(
    grid: LayeredGrid,
    ws: LocalWorkspace,
    zone: ZoneId,
    dig_point,
    sdf_dump: np.ndarray,
    alpha: float = 4.0,
    min_usable_area: float = 1.5,
) -> float:
    """Dumping cost: mean dump-set distance plus squared haul distance.

    Returns +inf when the zone has too little usable area to receive soil.
    """
    state = ws.zones[zone]
    rows, cols = usable_dump_cells(grid, state)
    if len(rows) * grid.cell_area() < min_usable_area:
        return math.inf
    mean_sdf = float(sdf_dump[rows, cols].mean())
    if not math.isfinite(mean_sdf):
        return math.inf
    cx = float(np.mean(grid.origin[0] + cols * grid.resolution))
    cy = float(np.mean(grid.origin[1] + rows * grid.resolution))
    dig = dig_point if dig_point is not None else (cx, cy)
    d2 = (dig[0] - cx) ** 2 + (dig[1] - cy) ** 2
    return mean_sdf + alpha * d2


class WorkspaceDone:
    pass


class Refine:
    pass


def select_dig_dump(
    grid: LayeredGrid,
    ws: LocalWorkspace,
    sdf_dump: np.ndarray,
    refine_mean_error: float = 0.025,
    max_refine_passes: int = 2,
    skip_zones: frozenset = frozenset(),
):
    """Pick (dig zone, dump zone), or request refinement, or declare done.

    Front digs first, then incomplete laterals (left before right, ties by
    larger remaining volume). The dump zone is the cheapest of the other
    four; all-infinite costs raise DumpDeadlock. Zones in skip_zones are
    treated as complete (caller-side guard against unreachable residue).
    """
    dig_zone = None
    if ZoneId.FRONT not in skip_zones and not zone_complete(grid, ws, ZoneId.FRONT):
        dig_zone = ZoneId.FRONT
    else:
        cand = [
            z for z in LATERAL_ZONES if z not in skip_zones and not zone_complete(grid, ws, z)
        ]
        if len(cand) == 1:
            dig_zone = cand[0]
        elif len(cand) == 2:
            vols = {z: _remaining_volume(grid, ws.zones[z]) for z in cand}
            dig_zone = ZoneId.FRONT_LEFT
            if vols[ZoneId.FRONT_RIGHT] > vols[ZoneId.FRONT_LEFT]:
                dig_zone = ZoneId.FRONT_RIGHT

    if dig_zone is None:
        front = ws.zones[ZoneId.FRONT]
        relevant, excess = _dig_targets(grid, front)
        needs_refine = False
        if relevant is not None and relevant.any():
            mean_err = float(np.abs(excess[relevant]).mean())
            frac = deviation_fraction(grid, front, ws.thresholds)
            needs_refine = mean_err > refine_mean_error or frac >= ws.thresholds.deviation_fraction
        if needs_refine and ZoneId.FRONT not in skip_zones and front.refined_passes < max_refine_passes:
            return Refine()
        return WorkspaceDone()

    dig_point = ws.last_dig_point
    costs = {}
    for zone in DUMP_ZONES:
        if zone is dig_zone:
            continue
        costs[zone] = dump_cost(grid, ws, zone, dig_point, sdf_dump)
    best = min(costs, key=lambda z: (costs[z], z.value))
    if not math.isfinite(costs[best]):
        raise DumpDeadlock(f"no usable dump zone at pose {ws.pose}; costs={costs}")
    return dig_zone, best


def refresh_mask(
    grid: LayeredGrid,
    poses,
    pose_index: int,
    geometry: LocalGeometry | None = None,
    footprint_half_dims: tuple[float, float] = (2.5, 1.5),
    dig_height: float = 0.05,
    boundary_width: float = 1.0,
    hull_margin: float = 1.2,
) -> np.ndarray:
    """Rebuild the excavation-mask layer for the current point in the plan.

    Dig marks cells still above target; Neutral covers the convex hull of
    current-and-future base footprints plus permanent dumps unreachable from
    the pose; a 1 m Boundary ring guards the dig edge; user NoGo is verbatim.
    """
    geometry = geometry or LocalGeometry()
    user = grid.layers[USER_MASK]
    elev = grid.layers[ELEVATION]
    target = grid.layers[TARGET_ELEVATION]
    mask = np.full(grid.dims, float(MaskValue.NEUTRAL))

    perm = user == MaskValue.PERMANENT_DUMP
    mask[perm] = MaskValue.PERMANENT_DUMP
    if 0 <= pose_index < len(poses):
        px, py, _ = poses[pose_index]
        gx, gy = grid.cell_centers()
        reach = np.hypot(gx - px, gy - py) <= geometry.max_reach
        mask[perm & ~reach] = MaskValue.NEUTRAL

    diggable = (user == MaskValue.DIG) & np.isfinite(target) & (elev - target > dig_height)
    mask[diggable] = MaskValue.DIG

    # Boundary ring just outside the dig area.
    dig_region = user == MaskValue.DIG
    if dig_region.any():
        dist = distance_field(dig_region, grid.resolution)
        ring = (~dig_region) & (dist <= boundary_width)
        mask[ring & (mask == MaskValue.NEUTRAL)] = MaskValue.BOUNDARY

    # Convex hull of current-and-future footprints: keep clear of soil.
    hull_layer = np.zeros(grid.dims)
    future = list(poses[pose_index:])
    if future:
        pts = []
        for x, y, heading in future:
            fp = Footprint((x, y), heading, footprint_half_dims[0], footprint_half_dims[1])
            pts.extend(fp.corners().tolist())
        hull = MultiPoint(pts).convex_hull.buffer(0.0)
        gx, gy = grid.cell_centers()
        inside = shapely.contains_xy(hull, gx.ravel(), gy.ravel()).reshape(grid.dims)
        # The dump-exclusion layer is wider than the hull itself: deposits
        # are Gaussian piles whose tails would otherwise creep under the
        # footprints of upcoming base poses.
        near = shapely.contains_xy(
            hull.buffer(hull_margin), gx.ravel(), gy.ravel()
        ).reshape(grid.dims)
        hull_layer[near] = 1.0
        # Digging or dumping under a future footprint would strand the base.
        mask[inside] = MaskValue.NEUTRAL

    mask[user == MaskValue.NO_GO] = MaskValue.NO_GO

    grid.layers[EXCAVATION_MASK] = mask
    grid.layers[FUTURE_HULL] = hull_layer
    return mask
