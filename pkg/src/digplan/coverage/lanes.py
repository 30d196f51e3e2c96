"""Lane synthesis inside cells and entry/exit optimization across the tour.

The machine digs in retreat: at each base pose it excavates the band
[r_in, r_out] ahead of it, then backs up one pose spacing. A lane is a
straight run of such poses; a cell is covered by parallel lanes spaced so
the dig sectors of adjacent lanes touch. For each cell we enumerate lane
orderings and dig directions, then a stage DP over the visit sequence picks
the combination per cell that minimizes total driven distance, with an
infinite transition cost when the connecting corridor crosses an obstacle
or a previously dug (now impassable) cell.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import distance_transform_edt

from ..errors import InfeasiblePlan

TURN_SURCHARGE = 2.0  # m equivalent per 180-degree heading reversal
SUBROUTINES = ("alternating", "same_direction", "center_out")


@dataclass
class LaneParams:
    r_in: float = 4.5
    r_out: float = 7.0
    workspace_angle: float = 1.9
    machine_radius: float = 2.0

    def lane_spacing(self, resolution: float) -> float:
        return 2.0 * self.r_out * math.sin(self.workspace_angle / 2.0) - math.sqrt(2.0) * resolution

    @property
    def pose_spacing(self) -> float:
        return self.r_out - self.r_in


@dataclass
class Lane:
    x: float  # rotated-frame lane coordinate
    y_lo: float
    y_hi: float
    direction: int  # +1 digs toward +y', -1 toward -y'

    def poses(self, params: LaneParams):
        """Retreat-dig base poses, first pose deepest in the lane.

        A pose at q covers [q + r_in, q + r_out] ahead; the machine backs
        up by pose_spacing between scoop groups, so poses run far to near
        and may sit outside the lane interval itself.
        """
        a, b = self.y_lo, self.y_hi
        span = b - a
        step = params.pose_spacing
        if self.direction > 0:
            first = b - params.r_out
            n = 1 if span <= step else int(math.ceil((span - step) / step)) + 1
            ys = first - np.arange(n) * step
        else:
            first = a + params.r_out
            n = 1 if span <= step else int(math.ceil((span - step) / step)) + 1
            ys = first + np.arange(n) * step
        return [(self.x, float(y), self.direction) for y in ys]


@dataclass
class CellOption:
    subroutine: str
    order_sign: int  # +1 lanes left to right, -1 right to left
    first_direction: int
    poses: list  # rotated-frame (x', y', direction)
    internal_cost: float

    @property
    def entry(self):
        return self.poses[0]

    @property
    def exit(self):
        return self.poses[-1]


@dataclass
class CellRoute:
    cell_id: int
    option: CellOption
    world_poses: list = field(default_factory=list)  # (x, y, heading)


def _cell_lanes(cell, frame, params: LaneParams):
    """Lane abscissas and per-lane row intervals for one cell."""
    res = frame.resolution
    c0, c1 = cell.col_range
    x_lo = frame.origin[0] + (c0 - 0.5) * res
    x_hi = frame.origin[0] + (c1 + 0.5) * res
    extent = x_hi - x_lo
    spacing = params.lane_spacing(res)
    n = max(1, int(math.ceil(extent / spacing)))
    slab_by_col = {col: (lo, hi) for col, lo, hi in cell.slabs}
    lanes = []
    for i in range(n):
        x = x_lo + (i + 0.5) * extent / n
        col = min(max(int(round((x - frame.origin[0]) / res)), c0), c1)
        while col not in slab_by_col:  # split/merge columns can be absent
            col += 1 if col < c1 else -1
        lo, hi = slab_by_col[col]
        y_lo = frame.origin[1] + (lo - 0.5) * res
        y_hi = frame.origin[1] + (hi + 0.5) * res
        lanes.append((x, y_lo, y_hi))
    return lanes


def _lane_order(n: int, subroutine: str, order_sign: int):
    idx = list(range(n))
    if subroutine == "center_out":
        mid = n // 2
        out = [mid]
        for d in range(1, n):
            for s in (order_sign, -order_sign):
                j = mid + s * d
                if 0 <= j < n and j not in out:
                    out.append(j)
        return out[:n]
    return idx if order_sign > 0 else idx[::-1]


def enumerate_options(cell, frame, params: LaneParams):
    """All lane-ordering x direction combinations for one cell."""
    lanes = _cell_lanes(cell, frame, params)
    options = []
    for subroutine in SUBROUTINES:
        for order_sign in (1, -1):
            for first_direction in (1, -1):
                if subroutine == "center_out" and len(lanes) < 3 and order_sign < 0:
                    continue  # mirrored center-out is identical below 3 lanes
                order = _lane_order(len(lanes), subroutine, order_sign)
                poses = []
                cost = 0.0
                direction = first_direction
                prev = None
                for k, i in enumerate(order):
                    x, y_lo, y_hi = lanes[i]
                    lane = Lane(x, y_lo, y_hi, direction)
                    lane_poses = lane.poses(params)
                    if prev is not None:
                        cost += math.hypot(lane_poses[0][0] - prev[0], lane_poses[0][1] - prev[1])
                        if lane_poses[0][2] != prev[2]:
                            cost += TURN_SURCHARGE
                    for j in range(1, len(lane_poses)):
                        cost += math.hypot(
                            lane_poses[j][0] - lane_poses[j - 1][0],
                            lane_poses[j][1] - lane_poses[j - 1][1],
                        )
                    poses.extend(lane_poses)
                    prev = lane_poses[-1]
                    if subroutine == "alternating":
                        direction = -direction
                options.append(CellOption(subroutine, order_sign, first_direction, poses, cost))
    return options


class CorridorChecker:
    """Corridor distance between cell exit and entry poses.

    The straight centerline is used when it keeps machine_radius of
    clearance from obstacles and crosses no already-dug cell (the machine
    cannot cross the pit); otherwise the cost is the shortest 8-connected
    detour through free ground, infinite when none exists.
    """

    def __init__(self, frame, label, obstacle, params: LaneParams):
        self.frame = frame
        self.label = label
        self.params = params
        if obstacle.any():
            self.clearance = distance_transform_edt(~obstacle) * frame.resolution
        else:
            self.clearance = np.full(obstacle.shape, np.inf)
        self._fields: dict = {}

    def _cell(self, p):
        row = int(round((p[1] - self.frame.origin[1]) / self.frame.resolution))
        col = int(round((p[0] - self.frame.origin[0]) / self.frame.resolution))
        row = min(max(row, 0), self.label.shape[0] - 1)
        col = min(max(col, 0), self.label.shape[1] - 1)
        return row, col

    def distance(self, p, q, dug) -> float:
        d = math.hypot(q[0] - p[0], q[1] - p[1])
        n = max(2, int(math.ceil(d / self.frame.resolution)) + 1)
        xs = np.linspace(p[0], q[0], n)
        ys = np.linspace(p[1], q[1], n)
        rows = np.round((ys - self.frame.origin[1]) / self.frame.resolution).astype(int)
        cols = np.round((xs - self.frame.origin[0]) / self.frame.resolution).astype(int)
        rows = np.clip(rows, 0, self.label.shape[0] - 1)
        cols = np.clip(cols, 0, self.label.shape[1] - 1)
        clear = not np.any(self.clearance[rows, cols] < self.params.machine_radius)
        if clear and dug:
            clear = not np.any(np.isin(self.label[rows, cols], list(dug)))
        if clear:
            return d
        return self._detour(p, q, frozenset(dug))

    def _detour(self, p, q, dug) -> float:
        key = (dug, self._cell(q))
        if key not in self._fields:
            self._fields[key] = self._distance_field(dug, self._cell(q))
        row, col = self._cell(p)
        return float(self._fields[key][row, col])

    def _distance_field(self, dug, target):
        from scipy.sparse import coo_matrix
        from scipy.sparse.csgraph import dijkstra

        free = self.clearance >= self.params.machine_radius
        if dug:
            free &= ~np.isin(self.label, sorted(dug))
        n_rows, n_cols = free.shape
        idx = np.arange(n_rows * n_cols).reshape(free.shape)
        rows_i, cols_i, data = [], [], []
        res = self.frame.resolution
        for dr, dc, w in (
            (0, 1, res),
            (1, 0, res),
            (1, 1, res * math.sqrt(2.0)),
            (1, -1, res * math.sqrt(2.0)),
        ):
            a = free[max(0, -dr):n_rows - max(0, dr), max(0, -dc):n_cols - max(0, dc)]
            b = free[max(0, dr):n_rows - max(0, -dr), max(0, dc):n_cols - max(0, -dc)]
            ok = a & b
            ia = idx[max(0, -dr):n_rows - max(0, dr), max(0, -dc):n_cols - max(0, dc)][ok]
            ib = idx[max(0, dr):n_rows - max(0, -dr), max(0, dc):n_cols - max(0, -dc)][ok]
            rows_i.append(ia)
            cols_i.append(ib)
            data.append(np.full(len(ia), w))
        graph = coo_matrix(
            (np.concatenate(data), (np.concatenate(rows_i), np.concatenate(cols_i))),
            shape=(n_rows * n_cols, n_rows * n_cols),
        ).tocsr()
        source = target[0] * n_cols + target[1]
        dist = dijkstra(graph, directed=False, indices=source)
        return dist.reshape(free.shape)


def plan_cell_routes(cells, frame, label, order, obstacle=None, params: LaneParams | None = None):
    """Stage DP over the visit sequence; returns (routes, total_cost).

    Each stage holds one option per cell; the transition cost is the
    corridor distance from the previous cell's exit pose to the candidate
    entry pose, infinite when the corridor is blocked. Ties resolve toward
    the earlier-enumerated option for determinism.
    """
    params = params or LaneParams()
    if obstacle is None:
        obstacle = np.zeros(label.shape, dtype=bool)
    checker = CorridorChecker(frame, label, obstacle, params)
    by_id = {c.id: c for c in cells}

    stage_options = [enumerate_options(by_id[cid], frame, params) for cid in order]
    n = len(order)
    costs = [np.array([o.internal_cost for o in opts]) for opts in stage_options]
    back = [np.zeros(len(opts), dtype=int) for opts in stage_options]

    # transitions out of a just-finished cell may cross that cell (the
    # machine is still standing in it), so the dug set trails by one stage
    dug: set = set()
    acc = costs[0].copy()
    for s in range(1, n):
        prev_opts = stage_options[s - 1]
        cur_opts = stage_options[s]
        new = np.full(len(cur_opts), np.inf)
        for j, opt in enumerate(cur_opts):
            best = math.inf
            arg = 0
            for i, popt in enumerate(prev_opts):
                trans = checker.distance(popt.exit, opt.entry, dug)
                val = acc[i] + trans
                if val < best:
                    best = val
                    arg = i
            new[j] = best + opt.internal_cost
            back[s][j] = arg
        if not np.isfinite(new).any():
            raise InfeasiblePlan(f"no feasible corner sequence into cell {order[s]}")
        acc = new
        dug.add(order[s - 1])

    j = int(np.argmin(acc))
    total = float(acc[j])
    picks = [0] * n
    for s in range(n - 1, -1, -1):
        picks[s] = j
        j = int(back[s][j])

    routes = []
    for s, cid in enumerate(order):
        opt = stage_options[s][picks[s]]
        world = []
        for x, y, direction in opt.poses:
            wx, wy = frame.to_world(x, y)
            heading = frame.theta + (math.pi / 2.0 if direction > 0 else -math.pi / 2.0)
            world.append((float(wx), float(wy), heading))
        routes.append(CellRoute(cell_id=cid, option=opt, world_poses=world))
    return routes, total
