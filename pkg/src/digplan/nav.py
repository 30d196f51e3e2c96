"""Base navigation: occupancy fusion, RRT* over Reeds-Shepp motions, tracking.

Dug ground and soil piles are not traversable, so the occupancy map is
rebuilt from the live elevation layers before every drive. Edge costs
blend path length with proximity to dug areas so plans hug neither the
pit edge nor fresh piles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import distance_transform_edt

from .errors import PathNotFound
from .grid import ELEVATION, LayeredGrid, MaskValue, EXCAVATION_MASK, ORIGINAL_ELEVATION
from .local import DUG
from . import reeds_shepp as rs

PILE_HEIGHT_LIMIT = 0.3  # m of loose soil the tracks may still climb
DUG_DEPTH_LIMIT = 0.1  # m below original ground counts as a hole


@dataclass
class NavParams:
    turning_radius: float = 3.0
    speed: float = 0.5  # m/s tracking velocity
    half_length: float = 2.4
    half_width: float = 1.5
    alpha: float = 10.0
    beta: float = 5.0
    gamma: float = 0.7
    goal_bias: float = 0.15
    max_iterations: int = 300
    max_trials: int = 10
    rewire_radius: float = 10.0
    step: float = 0.25  # m collision-check spacing along an edge

    @property
    def circumradius(self) -> float:
        return math.hypot(self.half_length, self.half_width)

    def footprint_offsets(self, resolution: float) -> np.ndarray:
        """(k, 2) local samples covering the track rectangle at grid density."""
        nu = max(2, int(math.ceil(2 * self.half_length / resolution)) + 1)
        nv = max(2, int(math.ceil(2 * self.half_width / resolution)) + 1)
        us = np.linspace(-self.half_length, self.half_length, nu)
        vs = np.linspace(-self.half_width, self.half_width, nv)
        gu, gv = np.meshgrid(us, vs)
        return np.stack([gu.ravel(), gv.ravel()], axis=1)


@dataclass
class OccupancyGrid:
    resolution: float
    origin: tuple
    occupied: np.ndarray
    clearance: np.ndarray = field(init=False)
    sdf_dug: np.ndarray = field(init=False)
    dug: np.ndarray | None = None

    def __post_init__(self):
        res = self.resolution
        if self.occupied.any():
            self.clearance = distance_transform_edt(~self.occupied) * res
        else:
            self.clearance = np.full(self.occupied.shape, np.inf)
        dug = self.dug if self.dug is not None else np.zeros_like(self.occupied)
        if dug.any():
            self.sdf_dug = distance_transform_edt(~dug) * res
        else:
            self.sdf_dug = np.full(self.occupied.shape, np.inf)

    def cell(self, x, y):
        col = int(round((x - self.origin[0]) / self.resolution))
        row = int(round((y - self.origin[1]) / self.resolution))
        return row, col

    def inside(self, row, col):
        return 0 <= row < self.occupied.shape[0] and 0 <= col < self.occupied.shape[1]


def fuse_occupancy(grid: LayeredGrid) -> OccupancyGrid:
    """Merge no-go zones, dug ground, and piles into one occupancy map."""
    elev = grid.layers[ELEVATION]
    orig = grid.layers[ORIGINAL_ELEVATION]
    occupied = np.zeros(elev.shape, dtype=bool)
    if EXCAVATION_MASK in grid.layers:
        occupied |= grid.layers[EXCAVATION_MASK] == MaskValue.NO_GO
    dug = orig - elev > DUG_DEPTH_LIMIT
    if DUG in grid.layers:
        dug |= grid.layers[DUG] > 0.5
    occupied |= dug
    occupied |= elev - orig > PILE_HEIGHT_LIMIT
    return OccupancyGrid(grid.resolution, grid.origin, occupied, dug=dug)


def pose_valid(occ: OccupancyGrid, pose, params: NavParams, offsets=None) -> bool:
    """Exact footprint check: no occupied cell under the track rectangle.

    A clearance test at the center settles the common cases cheaply; only
    poses near obstacles rasterize the full rectangle.
    """
    x, y, h = pose[0], pose[1], pose[2]
    row, col = occ.cell(x, y)
    if not occ.inside(row, col):
        return False
    clear = occ.clearance[row, col]
    if clear >= params.circumradius:
        return True
    if clear < params.half_width - occ.resolution:
        return False
    if offsets is None:
        offsets = params.footprint_offsets(occ.resolution)
    c, s = math.cos(h), math.sin(h)
    px = x + offsets[:, 0] * c - offsets[:, 1] * s
    py = y + offsets[:, 0] * s + offsets[:, 1] * c
    rows = np.round((py - occ.origin[1]) / occ.resolution).astype(int)
    cols = np.round((px - occ.origin[0]) / occ.resolution).astype(int)
    if (
        rows.min() < 0
        or cols.min() < 0
        or rows.max() >= occ.occupied.shape[0]
        or cols.max() >= occ.occupied.shape[1]
    ):
        return False
    return not occ.occupied[rows, cols].any()


def _path_valid(occ, start, path, params) -> bool:
    pts = rs.sample_path(start, path, params.turning_radius, step=params.step)
    offsets = params.footprint_offsets(occ.resolution)
    return all(pose_valid(occ, p, params, offsets) for p in pts)


def edge_cost(occ: OccupancyGrid, start, path, params: NavParams) -> float:
    """Length plus mean dug-proximity penalty over the end-pose footprint."""
    d = path.length
    x, y, h = rs.path_end(start, path, params.turning_radius)
    c, s = math.cos(h), math.sin(h)
    res = occ.resolution
    nu = max(1, int(round(2 * params.half_length / res)))
    nv = max(1, int(round(2 * params.half_width / res)))
    us = np.linspace(-params.half_length, params.half_length, nu)
    vs = np.linspace(-params.half_width, params.half_width, nv)
    gu, gv = np.meshgrid(us, vs)
    px = x + gu * c - gv * s
    py = y + gu * s + gv * c
    rows = np.round((py - occ.origin[1]) / res).astype(int)
    cols = np.round((px - occ.origin[0]) / res).astype(int)
    rows = np.clip(rows, 0, occ.occupied.shape[0] - 1)
    cols = np.clip(cols, 0, occ.occupied.shape[1] - 1)
    sdf = occ.sdf_dug[rows, cols]
    penalty = float(np.mean(params.beta * np.exp(-params.gamma * sdf)))
    return params.alpha * d + penalty


@dataclass
class NavPlan:
    poses: np.ndarray  # (n, 4): x, y, heading, direction
    length: float
    cost: float
    iterations: int
    trial: int


def _connect(occ, a, b, params):
    path = rs.shortest_path(tuple(a[:3]), tuple(b[:3]), params.turning_radius)
    if _path_valid(occ, tuple(a[:3]), path, params):
        return path
    return None


def plan_path(occ: OccupancyGrid, start, goal, params: NavParams | None = None, seed: int = 0) -> NavPlan:
    """RRT* in SE(2) with Reeds-Shepp steering; up to max_trials restarts."""
    params = params or NavParams()
    if not pose_valid(occ, start, params):
        raise PathNotFound(f"start pose blocked: {tuple(round(v, 3) for v in start)}")
    if not pose_valid(occ, goal, params):
        raise PathNotFound(f"goal pose blocked: {tuple(round(v, 3) for v in goal)}")

    direct = _connect(occ, start, goal, params)
    if direct is not None:
        pts = rs.sample_path(start, direct, params.turning_radius, step=params.step)
        return NavPlan(pts, direct.length, edge_cost(occ, start, direct, params), 0, 0)

    free_rows, free_cols = np.nonzero(~occ.occupied)
    if len(free_rows) == 0:
        raise PathNotFound("occupancy map fully blocked")
    fx = occ.origin[0] + free_cols * occ.resolution
    fy = occ.origin[1] + free_rows * occ.resolution

    for trial in range(params.max_trials):
        rng = np.random.default_rng((seed, trial))
        result = _rrt_star(occ, start, goal, params, rng, fx, fy)
        if result is not None:
            plan, iters = result
            plan.trial = trial
            return plan
    raise PathNotFound(f"no path after {params.max_trials} trials")


def _rrt_star(occ, start, goal, params, rng, fx, fy):
    nodes = [tuple(start)]
    parents = [-1]
    costs = [0.0]
    paths = [None]
    best_goal = None  # (cost, node index, path to goal)

    for it in range(params.max_iterations):
        if rng.random() < params.goal_bias:
            sample = tuple(goal)
        else:
            i = int(rng.integers(len(fx)))
            sample = (
                float(fx[i] + rng.normal(scale=occ.resolution / 2)),
                float(fy[i] + rng.normal(scale=occ.resolution / 2)),
                float(rng.uniform(-math.pi, math.pi)),
            )
        if not pose_valid(occ, sample, params):
            continue
        # nearest by RS length, then try to connect
        rs_paths = [rs.shortest_path(n, sample, params.turning_radius) for n in nodes]
        order = np.argsort([p.length for p in rs_paths])
        new_idx = None
        for i in order[: max(5, len(order) // 4)]:
            if _path_valid(occ, nodes[i], rs_paths[i], params):
                cand_cost = costs[i] + edge_cost(occ, nodes[i], rs_paths[i], params)
                nodes.append(rs.path_end(nodes[i], rs_paths[i], params.turning_radius))
                parents.append(int(i))
                costs.append(cand_cost)
                paths.append(rs_paths[i])
                new_idx = len(nodes) - 1
                break
        if new_idx is None:
            continue
        # rewire neighbors through the new node when cheaper; ancestors are
        # excluded or the tree would cycle
        ancestors = set()
        a = new_idx
        while a >= 0:
            ancestors.add(a)
            a = parents[a]
        for j in range(len(nodes) - 1):
            if j in ancestors:
                continue
            if math.hypot(nodes[j][0] - nodes[new_idx][0], nodes[j][1] - nodes[new_idx][1]) > params.rewire_radius:
                continue
            p = rs.shortest_path(nodes[new_idx], nodes[j], params.turning_radius)
            c = costs[new_idx] + edge_cost(occ, nodes[new_idx], p, params)
            if c < costs[j] - 1e-9 and _path_valid(occ, nodes[new_idx], p, params):
                parents[j] = new_idx
                costs[j] = c
                paths[j] = p
        gp = _connect(occ, nodes[new_idx], goal, params)
        if gp is not None:
            total = costs[new_idx] + edge_cost(occ, nodes[new_idx], gp, params)
            if best_goal is None or total < best_goal[0]:
                best_goal = (total, new_idx, gp)

    if best_goal is None:
        return None
    total_cost, idx, gp = best_goal
    chain = []
    while idx >= 0:
        chain.append(idx)
        idx = parents[idx]
    chain.reverse()
    pts = []
    length = 0.0
    for k in range(1, len(chain)):
        seg = paths[chain[k]]
        pts.append(rs.sample_path(nodes[chain[k - 1]], seg, params.turning_radius, step=params.step))
        length += seg.length
    pts.append(rs.sample_path(nodes[chain[-1]], gp, params.turning_radius, step=params.step))
    length += gp.length
    return NavPlan(np.vstack(pts), length, total_cost, params.max_iterations, 0), params.max_iterations


def follow_path(plan: NavPlan, params: NavParams | None = None) -> float:
    """Track the plan at constant speed; returns the drive duration in s."""
    params = params or NavParams()
    return plan.length / params.speed
