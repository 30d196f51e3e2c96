"""Dig trajectory simulation, attack-point optimization, and dump-point search.

A dig is penetration, an inward drag, and a close. The attack point is
chosen by Bayesian optimization (GP surrogate + expected improvement) of the
simulated scooped volume over the zone's polar bounds. Dump points minimize
a shovel-filter convolution of pile height plus base-frame distance terms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm
from sklearn.gaussian_process import GaussianProcessRegressor
from sklearn.gaussian_process.kernels import Matern

from .grid import ELEVATION, LayeredGrid, ORIGINAL_ELEVATION

DRAG_DT = 0.1  # s per drag integration step
SELF_COLLISION_RADIUS = 2.5  # m; drag never comes closer to the base


@dataclass
class TrajectoryParams:
    gamma_min: float = 0.5
    gamma_max: float = 1.5
    gamma_max_dirt: float = 0.9
    drag_max: float = 1.5
    depth_max: float = 0.3
    bucket_volume: float = 0.6
    volume_max: float = 0.8
    close_height: float = 0.5
    dig_velocity: float = 0.5
    # Shovel dimensions are not physical constants of the method; these are
    # plausible defaults for a 12 t machine.
    shovel_width: float = 1.5
    shovel_edge_length: float = 0.5

    def __post_init__(self):
        if not self.gamma_min < self.gamma_max:
            raise ValueError("gamma_min must be below gamma_max")
        if self.bucket_volume > self.volume_max:
            raise ValueError("bucket volume above volume_max")


@dataclass
class ScoopResult:
    rows: np.ndarray
    cols: np.ndarray
    depths: np.ndarray
    volume: float
    termination: str
    attack: tuple[float, float]
    loose: bool
    drag_steps: int

    @property
    def empty(self) -> bool:
        return len(self.rows) == 0


def attitude(r: float, r_in: float, r_out: float, params: TrajectoryParams, loose: bool) -> float:
    """Attitude angle schedule: linear in radius, opening outward."""
    span = max(r_out - r_in, 1e-9)
    t = np.clip((r_out - r) / span, 0.0, 1.0)
    gamma = params.gamma_min + t * (params.gamma_max - params.gamma_min)
    if loose:
        gamma = min(gamma, params.gamma_max_dirt)
    return float(gamma)


def simulate_dig(
    grid: LayeredGrid,
    pose,
    attack: tuple[float, float],
    params: TrajectoryParams,
    allowed: np.ndarray,
    floor: np.ndarray,
    loose: bool = False,
    zone_r_in: float = 4.5,
    zone_r_out: float = 7.0,
) -> ScoopResult:
    """Simulate one scoop without mutating the grid.

    The shovel edge penetrates at the attack point, drags radially inward
    removing soil above max(floor, surface - depth_max) per column, and
    stops when the bucket is full, the drag limit or self-collision radius
    is hit, or the edge leaves diggable cells. Loose-soil scoops close
    vertically (no extra inward motion is modeled either way).
    """
    x0, y0, heading = pose
    r_att, th_att = attack
    if not (zone_r_in <= r_att <= zone_r_out):
        raise ValueError(f"attack radius {r_att} outside zone [{zone_r_in}, {zone_r_out}]")
    ang = heading + th_att
    ux, uy = math.cos(ang), math.sin(ang)
    # lateral unit vector of the edge
    vx, vy = -uy, ux

    elev = grid.layers[ELEVATION]
    res = grid.resolution
    half_w = params.shovel_width / 2.0
    n_lat = max(2, int(math.ceil(params.shovel_width / (res / 2.0))) + 1)
    lat = np.linspace(-half_w, half_w, n_lat)

    step = params.dig_velocity * DRAG_DT
    removed: dict[tuple[int, int], float] = {}
    surface0: dict[tuple[int, int], float] = {}
    volume = 0.0
    cell_area = grid.cell_area()
    termination = "drag_limit"
    dragged = 0.0
    steps = 0
    r = r_att
    while True:
        cx = x0 + r * ux
        cy = y0 + r * uy
        px = cx + lat * vx
        py = cy + lat * vy
        rows = np.round((py - grid.origin[1]) / res).astype(int)
        cols = np.round((px - grid.origin[0]) / res).astype(int)
        inb = (rows >= 0) & (rows < grid.rows) & (cols >= 0) & (cols < grid.cols)
        if not inb.any():
            termination = "out_of_map"
            break
        rows, cols = rows[inb], cols[inb]
        ok = allowed[rows, cols]
        if not ok.any():
            termination = "left_diggable"
            break
        for rr, cc in zip(rows[ok], cols[ok]):
            key = (int(rr), int(cc))
            if key not in surface0:
                surface0[key] = elev[key]
            fl = floor[key]
            if not np.isfinite(fl):
                continue
            limit = max(fl, surface0[key] - params.depth_max)
            current = elev[key] - removed.get(key, 0.0)
            depth = current - limit
            if depth > 1e-12:
                removed[key] = removed.get(key, 0.0) + depth
                volume += depth * cell_area
        steps += 1
        if volume >= params.volume_max:
            termination = "bucket_full"
            break
        r -= step
        dragged += step
        if r < SELF_COLLISION_RADIUS:
            termination = "self_collision"
            break
        if dragged >= params.drag_max:
            termination = "drag_limit"
            break

    if removed:
        keys = sorted(removed)
        rows = np.array([k[0] for k in keys])
        cols = np.array([k[1] for k in keys])
        depths = np.array([removed[k] for k in keys])
    else:
        rows = np.empty(0, dtype=int)
        cols = np.empty(0, dtype=int)
        depths = np.empty(0)
        if volume == 0.0 and termination == "drag_limit" and steps <= 1:
            termination = "no_soil"
    return ScoopResult(rows, cols, depths, volume, termination, attack, loose, steps)


# --- Attack-point optimization ----------------------------------------------


def lattice_samples(bounds, n_init: int, rng: np.random.Generator):
    """Cartesian lattice over the sector's bounding box, clipped to the
    sector, with Gaussian jitter of a quarter lattice spacing; polar output."""
    r_in, r_out, th_min, th_max = bounds
    angles = np.linspace(th_min, th_max, 16)
    xs = np.concatenate([r_in * np.cos(angles), r_out * np.cos(angles)])
    ys = np.concatenate([r_in * np.sin(angles), r_out * np.sin(angles)])
    x_lo, x_hi = xs.min(), xs.max()
    y_lo, y_hi = ys.min(), ys.max()

    k = 5
    while True:
        gx = np.linspace(x_lo, x_hi, k)
        gy = np.linspace(y_lo, y_hi, k)
        spacing = max((x_hi - x_lo), (y_hi - y_lo)) / max(k - 1, 1)
        pts = []
        for yv in gy:
            for xv in gx:
                r = math.hypot(xv, yv)
                th = math.atan2(yv, xv)
                if r_in <= r <= r_out and th_min <= th <= th_max:
                    pts.append((xv, yv))
        if len(pts) >= n_init or k > 40:
            break
        k += 1
    pts = np.array(pts[:n_init])
    pts = pts + rng.normal(scale=spacing / 4.0, size=pts.shape)
    r = np.hypot(pts[:, 0], pts[:, 1])
    th = np.arctan2(pts[:, 1], pts[:, 0])
    eps = 1e-6
    r = np.clip(r, r_in + eps, r_out - eps)
    th = np.clip(th, th_min + eps, th_max - eps)
    return np.stack([r, th], axis=1)


def _candidate_grid(bounds, n_r: int = 24, n_th: int = 36):
    r_in, r_out, th_min, th_max = bounds
    rr = np.linspace(r_in + 1e-6, r_out - 1e-6, n_r)
    tt = np.linspace(th_min + 1e-6, th_max - 1e-6, n_th)
    gr, gt = np.meshgrid(rr, tt)
    return np.stack([gr.ravel(), gt.ravel()], axis=1)


def expected_improvement(mu, sigma, best, xi=0.01):
    sigma = np.maximum(sigma, 1e-12)
    imp = mu - best - xi
    z = imp / sigma
    return imp * norm.cdf(z) + sigma * norm.pdf(z)


def optimize_attack(
    objective,
    bounds,
    seed: int,
    n_init: int = 20,
    n_iter: int = 10,
    length_scale: float = 1.0,
    noise: float = 1e-4,
    xi: float = 0.01,
):
    """Maximize objective(r, theta) over a sector with GP + EI (30 calls).

    Returns (r_best, theta_best, best_volume). Deterministic given the seed.
    """
    r_in, r_out, th_min, th_max = bounds
    rng = np.random.default_rng(seed)
    pts = lattice_samples(bounds, n_init, rng)
    vals = np.array([objective(float(r), float(t)) for r, t in pts])

    def to_xy(polar):
        return np.stack([polar[:, 0] * np.cos(polar[:, 1]), polar[:, 0] * np.sin(polar[:, 1])], axis=1)

    cand = _candidate_grid(bounds)
    cand_xy = to_xy(cand)
    kernel = Matern(length_scale=length_scale, nu=2.5)
    for _ in range(n_iter):
        if vals.max() <= 0 and vals.min() >= 0 and np.all(vals == 0):
            # Nothing diggable anywhere sampled; EI on a flat prior adds noise.
            break
        gp = GaussianProcessRegressor(kernel=kernel, alpha=noise, optimizer=None, normalize_y=False)
        gp.fit(to_xy(pts), vals)
        mu, sigma = gp.predict(cand_xy, return_std=True)
        ei = expected_improvement(mu, sigma, vals.max(), xi)
        idx = int(np.argmax(ei))
        nxt = cand[idx]
        pts = np.vstack([pts, nxt])
        vals = np.append(vals, objective(float(nxt[0]), float(nxt[1])))

    best = int(np.argmax(vals))
    return float(pts[best, 0]), float(pts[best, 1]), float(vals[best])


# --- Refinement sweeps -------------------------------------------------------


@dataclass
class GradingSweep:
    bearing: float  # sweep azimuth relative to heading
    r_start: float
    r_end: float  # inward: r_end < r_start


def plan_refinement(geometry, params: TrajectoryParams) -> list[GradingSweep]:
    """Left-to-right radially-inward grading sweeps over the expanded front zone."""
    r_in = geometry.front_r_in
    r_out = geometry.front_r_out * 1.1
    half = (geometry.workspace_angle / 2.0) * 1.1
    ang_width = params.shovel_width / geometry.front_r_out
    count = int(math.ceil(geometry.workspace_angle / ang_width))
    sweeps = []
    for i in range(count):
        bearing = half - (i + 0.5) * (2.0 * half / count)
        sweeps.append(GradingSweep(bearing=bearing, r_start=r_out, r_end=r_in))
    return sweeps


# --- Dump-point selection ----------------------------------------------------


@dataclass
class DumpWeights:
    alpha: float = 1.0
    beta: float = 0.1
    gamma: float = 0.05


def shovel_filter_offsets(params: TrajectoryParams, resolution: float):
    """Sample offsets (forward u, lateral v) covering the shovel rectangle."""
    nu = max(1, int(round(params.shovel_edge_length / resolution)))
    nv = max(1, int(round(params.shovel_width / resolution)))
    us = (np.arange(nu) + 0.5) / nu * params.shovel_edge_length - params.shovel_edge_length / 2
    vs = (np.arange(nv) + 0.5) / nv * params.shovel_width - params.shovel_width / 2
    gu, gv = np.meshgrid(us, vs)
    return np.stack([gu.ravel(), gv.ravel()], axis=1)


def dump_point_cost(grid, base_pose, x, y, params, weights):
    """Dump cost at one candidate cell; reference oracle form."""
    bx, by, bh = base_pose
    psi = math.atan2(y - by, x - bx) + math.pi / 2.0
    offsets = shovel_filter_offsets(params, grid.resolution)
    ch, sh = math.cos(psi), math.sin(psi)
    px = x + offsets[:, 0] * ch - offsets[:, 1] * sh
    py = y + offsets[:, 0] * sh + offsets[:, 1] * ch
    rows = np.clip(np.round((py - grid.origin[1]) / grid.resolution).astype(int), 0, grid.rows - 1)
    cols = np.clip(np.round((px - grid.origin[0]) / grid.resolution).astype(int), 0, grid.cols - 1)
    h_dirt = np.clip(
        grid.layers[ELEVATION][rows, cols] - grid.layers[ORIGINAL_ELEVATION][rows, cols], 0.0, None
    )
    conv = float(h_dirt.sum())
    dx = x - bx
    dy = y - by
    chh, shh = math.cos(bh), math.sin(bh)
    x_bd = dx * chh + dy * shh
    y_bd = -dx * shh + dy * chh
    return weights.alpha * conv - weights.beta * x_bd - weights.gamma * y_bd, psi


def select_dump_point_reference(grid, base_pose, rows, cols, params, weights=None):
    """Cell-by-cell search of the dump cost; reference for the batched form.

    Ties go to the cell farthest from the base. Returns (x, y, psi).
    """
    if len(rows) == 0:
        raise ValueError("dump zone has no usable cells")
    weights = weights or DumpWeights()
    bx, by, _ = base_pose
    best = None
    for rr, cc in zip(rows, cols):
        x = grid.origin[0] + cc * grid.resolution
        y = grid.origin[1] + rr * grid.resolution
        cost, psi = dump_point_cost(grid, base_pose, x, y, params, weights)
        dist = math.hypot(x - bx, y - by)
        key = (round(cost, 9), -round(dist, 9))
        if best is None or key < best[0]:
            best = (key, (x, y, psi))
    return best[1]


def select_dump_point(grid, base_pose, rows, cols, params: TrajectoryParams, weights: DumpWeights | None = None):
    """Batched dump cost over all allowed cells at once. Returns (x, y, psi)."""
    if len(rows) == 0:
        raise ValueError("dump zone has no usable cells")
    weights = weights or DumpWeights()
    bx, by, bh = base_pose
    res = grid.resolution
    x = grid.origin[0] + np.asarray(cols) * res
    y = grid.origin[1] + np.asarray(rows) * res
    psi = np.arctan2(y - by, x - bx) + math.pi / 2.0
    offsets = shovel_filter_offsets(params, res)
    ch, sh = np.cos(psi), np.sin(psi)
    px = x[:, None] + offsets[None, :, 0] * ch[:, None] - offsets[None, :, 1] * sh[:, None]
    py = y[:, None] + offsets[None, :, 0] * sh[:, None] + offsets[None, :, 1] * ch[:, None]
    rr = np.clip(np.round((py - grid.origin[1]) / res).astype(int), 0, grid.rows - 1)
    cc = np.clip(np.round((px - grid.origin[0]) / res).astype(int), 0, grid.cols - 1)
    h_dirt = np.clip(
        grid.layers[ELEVATION][rr, cc] - grid.layers[ORIGINAL_ELEVATION][rr, cc], 0.0, None
    )
    conv = h_dirt.sum(axis=1)
    dx, dy = x - bx, y - by
    chh, shh = math.cos(bh), math.sin(bh)
    x_bd = dx * chh + dy * shh
    y_bd = -dx * shh + dy * chh
    cost = weights.alpha * conv - weights.beta * x_bd - weights.gamma * y_bd
    dist = np.hypot(dx, dy)
    order = np.lexsort((-np.round(dist, 9), np.round(cost, 9)))
    i = int(order[0])
    return float(x[i]), float(y[i]), float(psi[i])
