"""Sweep-direction optimization and whole-site coverage planning.

The sweep angle for each connected diggable component is chosen by scoring
full candidate plans: normalized pose-path length, workspace count, and a
heavily weighted coverage shortfall, plus an optional pull toward the
region's principal axis. Components are then ordered by a shortest
open-path tour over their entry and exit poses.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import label as nd_label

from ..errors import InfeasiblePlan
from ..local import wrap_angle
from .decompose import decompose
from .graph import min_branching_tree, quotient_graph, reachable_from, visit_order
from .lanes import LaneParams, plan_cell_routes

HELD_KARP_LIMIT = 12


@dataclass
class OrientationWeights:
    axis: float = 0.0
    path: float = 1.0
    count: float = 1.0
    coverage: float = 100.0


@dataclass
class ComponentPlan:
    theta: float
    frame: object
    cells: list
    order: list
    routes: list
    path_length: float
    coverage: float
    score: float
    area: float

    @property
    def poses(self):
        out = []
        for route in self.routes:
            out.extend(route.world_poses)
        return out


def principal_axis(diggable: np.ndarray, resolution: float) -> float:
    """Orientation of the region's dominant second-moment eigenvector."""
    rows, cols = np.nonzero(diggable)
    x = cols * resolution
    y = rows * resolution
    x = x - x.mean()
    y = y - y.mean()
    cov = np.array([[np.mean(x * x), np.mean(x * y)], [np.mean(x * y), np.mean(y * y)]])
    vals, vecs = np.linalg.eigh(cov)
    v = vecs[:, int(np.argmax(vals))]
    return _fold(math.atan2(v[1], v[0]))


def _fold(theta: float) -> float:
    """Fold an angle into [-pi/2, pi/2): sweeps are symmetric under pi."""
    t = wrap_angle(theta)
    if t >= math.pi / 2.0:
        t -= math.pi
    elif t < -math.pi / 2.0:
        t += math.pi
    return t


def covered_fraction(grid, diggable: np.ndarray, poses, params: LaneParams) -> float:
    """Fraction of diggable cells inside at least one pose's dig sector."""
    res = grid.resolution
    covered = np.zeros_like(diggable)
    half = params.workspace_angle / 2.0
    w = int(math.ceil(params.r_out / res)) + 1
    for x, y, heading in poses:
        col = int(round((x - grid.origin[0]) / res))
        row = int(round((y - grid.origin[1]) / res))
        r0, r1 = max(0, row - w), min(grid.rows, row + w + 1)
        c0, c1 = max(0, col - w), min(grid.cols, col + w + 1)
        if r0 >= r1 or c0 >= c1:
            continue
        cy = grid.origin[1] + np.arange(r0, r1) * res
        cx = grid.origin[0] + np.arange(c0, c1) * res
        gx, gy = np.meshgrid(cx, cy)
        dx = gx - x
        dy = gy - y
        r = np.hypot(dx, dy)
        bearing = np.arctan2(dy, dx) - heading
        bearing = np.arctan2(np.sin(bearing), np.cos(bearing))
        sector = (r >= params.r_in) & (r <= params.r_out) & (np.abs(bearing) <= half)
        covered[r0:r1, c0:c1] |= sector
    n_dig = int(diggable.sum())
    if n_dig == 0:
        return 1.0
    return float((covered & diggable).sum()) / n_dig


def plan_component(grid, diggable, theta, params: LaneParams | None = None, obstacle_world=None):
    """Plan one component at a fixed sweep angle; returns a ComponentPlan."""
    params = params or LaneParams()
    frame, cells, label_map = decompose(grid, diggable, theta)
    adj = quotient_graph(cells, frame, label_map)
    # root: leftmost cell (first opened by the sweep) that can reach every
    # other cell along the directed edges — the leftmost cell itself may be
    # a pocket with no outgoing edges
    all_ids = {c.id for c in cells}
    root = None
    for cand in sorted(cells, key=lambda c: (c.col_range[0], c.id)):
        if reachable_from(adj, cand.id) == all_ids:
            root = cand.id
            break
    if root is None:
        root = min(c.id for c in cells if c.col_range[0] == min(cc.col_range[0] for cc in cells))
    parent = min_branching_tree(cells, adj, root, frame.resolution)
    order = visit_order(cells, parent, root)

    obstacle = np.zeros(label_map.shape, dtype=bool)
    if obstacle_world is not None and obstacle_world.any():
        rr = np.arange(label_map.shape[0])
        cc = np.arange(label_map.shape[1])
        gc, gr = np.meshgrid(cc, rr)
        cx, cy = frame.cell_center(gr, gc)
        wx, wy = frame.to_world(cx, cy)
        oc = np.round((wx - grid.origin[0]) / grid.resolution).astype(int)
        orow = np.round((wy - grid.origin[1]) / grid.resolution).astype(int)
        inb = (orow >= 0) & (orow < grid.rows) & (oc >= 0) & (oc < grid.cols)
        obstacle[inb] = obstacle_world[orow[inb], oc[inb]]

    routes, path_length = plan_cell_routes(cells, frame, label_map, order, obstacle, params)
    poses = [p for route in routes for p in route.world_poses]
    area = float(diggable.sum()) * grid.cell_area()
    cov = covered_fraction(grid, diggable, poses, params)
    return ComponentPlan(
        theta=theta,
        frame=frame,
        cells=cells,
        order=order,
        routes=routes,
        path_length=path_length,
        coverage=cov,
        score=math.nan,
        area=area,
    )


def _score(plan: ComponentPlan, phi: float, weights: OrientationWeights, params: LaneParams) -> float:
    a_w = 0.5 * math.pi * params.r_out**2
    n_poses = sum(len(r.world_poses) for r in plan.routes)
    j = weights.axis * abs(_fold(plan.theta - phi))
    j += weights.path * plan.path_length / math.sqrt(plan.area)
    j += weights.count * n_poses * a_w / plan.area
    j += weights.coverage * (1.0 - plan.coverage)
    return j


def optimize_orientation(
    grid,
    diggable,
    params: LaneParams | None = None,
    weights: OrientationWeights | None = None,
    obstacle_world=None,
    n_samples: int = 36,
    tol: float = 0.01,
):
    """Pick the sweep angle minimizing the plan score over [-pi/2, pi/2).

    Coarse angular sampling (plus the principal axis itself) followed by a
    golden-section polish around the best sample. n_samples=0 disables the
    search and plans along the principal axis.
    """
    params = params or LaneParams()
    weights = weights or OrientationWeights()
    phi = principal_axis(diggable, grid.resolution)

    def evaluate(theta):
        plan = plan_component(grid, diggable, theta, params, obstacle_world)
        plan.score = _score(plan, phi, weights, params)
        return plan

    if n_samples == 0:
        plan = evaluate(phi)
        return plan

    thetas = list(-math.pi / 2.0 + math.pi * np.arange(n_samples) / n_samples)
    thetas.append(phi)
    best = None
    for theta in thetas:
        try:
            plan = evaluate(theta)
        except InfeasiblePlan:
            continue
        if best is None or plan.score < best.score - 1e-12:
            best = plan
    if best is None:
        raise InfeasiblePlan("no sweep angle yields a connected plan")

    span = math.pi / n_samples
    lo, hi = best.theta - span, best.theta + span
    inv = (math.sqrt(5.0) - 1.0) / 2.0
    x1 = hi - inv * (hi - lo)
    x2 = lo + inv * (hi - lo)
    cache = {}

    def val(theta):
        if theta not in cache:
            try:
                cache[theta] = evaluate(theta)
            except InfeasiblePlan:
                cache[theta] = None
        p = cache[theta]
        return math.inf if p is None else p.score

    while hi - lo > tol:
        if val(x1) <= val(x2):
            hi, x2 = x2, x1
            x1 = hi - inv * (hi - lo)
        else:
            lo, x1 = x1, x2
            x2 = lo + inv * (hi - lo)
    for theta, plan in cache.items():
        if plan is not None and plan.score < best.score - 1e-12:
            best = plan
    return best


def _component_tour(entries, exits, start=None):
    """Open-path visiting order over component entry/exit poses.

    Leg i->j is costed exit_i to entry_j. Exact dynamic program (all start
    points) up to HELD_KARP_LIMIT components, nearest-neighbor plus 2-opt
    beyond.
    """
    n = len(entries)
    if n == 1:
        return [0]
    ent = np.asarray(entries, dtype=float)
    ext = np.asarray(exits, dtype=float)
    dist = np.hypot(ext[:, None, 0] - ent[None, :, 0], ext[:, None, 1] - ent[None, :, 1])
    if start is not None:
        d0 = np.hypot(ent[:, 0] - start[0], ent[:, 1] - start[1])
    else:
        d0 = np.zeros(n)

    if n <= HELD_KARP_LIMIT:
        full = (1 << n) - 1
        dp = {}
        back = {}
        for i in range(n):
            dp[(1 << i, i)] = d0[i]
        for mask in range(1, full + 1):
            for last in range(n):
                key = (mask, last)
                if key not in dp:
                    continue
                base = dp[key]
                for j in range(n):
                    bit = 1 << j
                    if mask & bit:
                        continue
                    nk = (mask | bit, j)
                    cand = base + dist[last, j]
                    if nk not in dp or cand < dp[nk] - 1e-12:
                        dp[nk] = cand
                        back[nk] = key
                if mask == full:
                    pass
        end = min(range(n), key=lambda i: (dp[(full, i)], i))
        order = [end]
        key = (full, end)
        while key in back:
            key = back[key]
            order.append(key[1])
        return order[::-1]

    order = [int(np.argmin(d0))]
    remaining = set(range(n)) - set(order)
    while remaining:
        last = order[-1]
        nxt = min(remaining, key=lambda j: (dist[last, j], j))
        order.append(nxt)
        remaining.discard(nxt)
    improved = True
    while improved:
        improved = False
        for i, j in itertools.combinations(range(n), 2):
            if j - i < 1 or (i == 0 and start is None):
                continue
            new = order[:i] + order[i:j + 1][::-1] + order[j + 1:]

            def plen(o):
                t = d0[o[0]] if start is not None else 0.0
                return t + sum(dist[o[k], o[k + 1]] for k in range(n - 1))

            if plen(new) < plen(order) - 1e-9:
                order = new
                improved = True
    return order


def plan_site(grid, diggable, params=None, weights=None, obstacle_world=None, start=None, n_samples=36):
    """Plan every connected diggable component and order them into a tour.

    Returns (component_plans, order) with plans indexed by component label.
    """
    if not diggable.any():
        raise InfeasiblePlan("nothing to dig")
    labels, n_comp = nd_label(diggable)
    plans = []
    entries = []
    exits = []
    for comp in range(1, n_comp + 1):
        mask = labels == comp
        plan = optimize_orientation(grid, mask, params, weights, obstacle_world, n_samples)
        plans.append(plan)
        entries.append(plan.routes[0].world_poses[0][:2])
        exits.append(plan.routes[-1].world_poses[-1][:2])
    order = _component_tour(entries, exits, start)
    return plans, order
