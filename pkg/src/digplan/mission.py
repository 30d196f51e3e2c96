"""Mission execution: a state machine driving the full dig cycle per pose.

For every planned base pose the machine refreshes its workspace, then
loops scoop cycles (pick attack point, dig, pick dump point, dump) until
the zones report complete, optionally runs grading passes, retracts the
arm, and drives to the next pose. Wall-clock time is accumulated from
fixed per-state durations plus a per-step digging term, so mission
duration is a deterministic function of the terrain and the seed.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, fields
from enum import Enum

import numpy as np

from . import local as lw
from .digging import (
    DumpWeights,
    ScoopResult,
    TrajectoryParams,
    optimize_attack,
    plan_refinement,
    select_dump_point,
    simulate_dig,
)
from .errors import DumpDeadlock, PathNotFound
from .grid import (
    ELEVATION,
    LayeredGrid,
    MaskValue,
    ORIGINAL_ELEVATION,
    TARGET_ELEVATION,
    signed_distance,
)
from .local import DUG, USER_MASK, ZoneId
from .nav import NavParams, follow_path, fuse_occupancy, plan_path
from .soil import DepositSpec, MIN_DEPOSIT_VOLUME, apply_scoop, deposit


class MissionState(Enum):
    INITIALIZE_WORKSPACE = "InitializeWorkspace"
    CHECK_WORKSPACE = "CheckWorkspace"
    FIND_DIG_POINT = "FindDigPoint"
    DIG = "Dig"
    DUMP = "Dump"
    FIND_PATH_PLAN = "FindPathPlan"
    DRIVING = "Driving"
    RETRACT_ARM = "RetractArm"
    DONE = "Done"
    FAILED = "Failed"


@dataclass
class MissionConfig:
    seed: int = 0
    t_initialize: float = 0.45
    t_check: float = 0.29
    t_arm_to_dig: float = 8.0
    t_dump: float = 9.9
    t_retract: float = 4.0
    t_dig_base: float = 11.0
    t_dig_per_step: float = 0.1
    t_plan: float = 0.5
    epsilon_volume: float = 0.02
    max_scoops_per_pose: int = 200
    deposit_slices: int = 3
    refine_mean_error: float = 0.025
    max_refine_passes: int = 2

    @classmethod
    def from_ini(cls, path) -> "MissionConfig":
        parser = configparser.ConfigParser()
        with open(path) as fh:
            parser.read_file(fh)
        sec = parser["mission"]
        kwargs = {f.name: _cast(f, sec[f.name]) for f in fields(cls) if f.name in sec}
        return cls(**kwargs)

    def to_ini(self, path) -> None:
        parser = configparser.ConfigParser()
        parser["mission"] = {f.name: repr(getattr(self, f.name)) for f in fields(self)}
        with open(path, "w") as fh:
            parser.write(fh)


def _cast(f, raw):
    if f.type in ("int", int):
        return int(raw)
    return float(raw)


@dataclass
class MissionLog:
    events: list = field(default_factory=list)

    def add(self, t: float, state: MissionState, **detail):
        self.events.append((t, state, detail))

    def lines(self):
        out = []
        for t, state, detail in self.events:
            extras = " ".join(f"{k}={_fmt(v)}" for k, v in sorted(detail.items()))
            out.append(f"t={t:.2f} state={state.value}" + (f" {extras}" if extras else ""))
        return out

    def write(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("\n".join(self.lines()) + "\n")


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.4f}"
    return str(v)


@dataclass
class ScoopRecord:
    pose_index: int
    dig_zone: str
    dump_zone: str
    volume: float
    cycle_time: float
    termination: str


@dataclass
class MissionResult:
    state: MissionState
    total_time: float
    scoops: list
    drive_time: float
    drive_count: int
    refine_passes: int
    log: MissionLog
    failure: str | None = None
    gradings: list = field(default_factory=list)

    @property
    def cycle_times(self):
        return [s.cycle_time for s in self.scoops]

    @property
    def total_volume(self) -> float:
        return sum(s.volume for s in self.scoops)


def cycle_metrics(result: MissionResult) -> dict:
    """Summary statistics of one mission run."""
    cycles = np.array(result.cycle_times) if result.scoops else np.zeros(0)
    vols = np.array([s.volume for s in result.scoops]) if result.scoops else np.zeros(0)
    hours = result.total_time / 3600.0
    return {
        "n_scoops": len(result.scoops),
        "cycle_mean": float(cycles.mean()) if len(cycles) else 0.0,
        "cycle_std": float(cycles.std()) if len(cycles) else 0.0,
        "volume_mean": float(vols.mean()) if len(vols) else 0.0,
        "volume_std": float(vols.std()) if len(vols) else 0.0,
        "total_volume": float(vols.sum()),
        "total_time": result.total_time,
        "drive_time": result.drive_time,
        "dig_rate": float(vols.sum()) / hours if hours > 0 else 0.0,
        "n_gradings": len(result.gradings),
        "grading_volume": float(sum(g.volume for g in result.gradings)),
    }


def _dump_sdf(grid):
    """Distance to permanent dump areas; zero when the site has none."""
    sdf = signed_distance(grid, [MaskValue.PERMANENT_DUMP])
    if not np.isfinite(sdf).any():
        return np.zeros(grid.dims)
    return sdf


def _zone_dig_context(grid, ws, zone):
    """(allowed, floor, loose) arrays for digging one zone."""
    user = grid.layers[USER_MASK]
    elev = grid.layers[ELEVATION]
    if zone is ZoneId.FRONT:
        allowed = grid.mask() == MaskValue.DIG
        floor = grid.layers[TARGET_ELEVATION]
        loose = False
    else:
        orig = grid.layers[ORIGINAL_ELEVATION]
        allowed = np.zeros(grid.dims, dtype=bool)
        state = ws.zones[zone]
        allowed[state.rows, state.cols] = True
        allowed &= (user != MaskValue.PERMANENT_DUMP) & (user != MaskValue.NO_GO)
        allowed &= elev - orig > 0.01
        floor = orig
        loose = True
    return allowed, floor, loose


def _mark_dug(grid, scoop: ScoopResult) -> None:
    elev = grid.layers[ELEVATION][scoop.rows, scoop.cols]
    orig = grid.layers[ORIGINAL_ELEVATION][scoop.rows, scoop.cols]
    dug = grid.layers[DUG]
    hole = orig - elev > 0.05
    dug[scoop.rows[hole], scoop.cols[hole]] = 1.0


def _dump_soil(grid, ws, dump_zone, volume, traj, cfg):
    """Choose a dump point in the zone and deposit the carried soil."""
    state = ws.zones[dump_zone]
    rows, cols = lw.usable_dump_cells(grid, state)
    if len(rows) == 0:
        raise DumpDeadlock(f"dump zone {dump_zone.value} lost all usable cells")
    x, y, psi = select_dump_point(grid, ws.pose, rows, cols, traj, DumpWeights())
    spec = DepositSpec(
        center=(x, y),
        heading=psi,
        volume=volume,
        sigma_x=traj.shovel_edge_length / 2.0,
        sigma_y=traj.shovel_width / 2.0,
        slices=cfg.deposit_slices,
    )
    added = deposit(grid, spec)
    if dump_zone in lw.LATERAL_ZONES:
        # piles raise the zone's planned dig volume; keep the running max so
        # the 8%-volume completion test stays meaningful
        state.planned_volume = max(state.planned_volume, lw._remaining_volume(grid, state))
    return (x, y), added


def run_mission(
    grid: LayeredGrid,
    poses,
    config: MissionConfig | None = None,
    geometry: lw.LocalGeometry | None = None,
    thresholds: lw.CompletionThresholds | None = None,
    traj: TrajectoryParams | None = None,
    nav_params: NavParams | None = None,
    log: MissionLog | None = None,
) -> MissionResult:
    """Execute the pose plan on the grid, mutating its elevation in place."""
    cfg = config or MissionConfig()
    geometry = geometry or lw.LocalGeometry()
    thresholds = thresholds or lw.CompletionThresholds()
    traj = traj or TrajectoryParams()
    nav_params = nav_params or NavParams()
    log = log or MissionLog()

    if DUG not in grid.layers:
        grid.layers[DUG] = np.zeros(grid.dims)

    t = 0.0
    scoops: list[ScoopRecord] = []
    gradings: list[ScoopRecord] = []
    drive_time = 0.0
    drive_count = 0
    refine_total = 0
    scoop_seq = 0

    for i, pose in enumerate(poses):
        if i > 0:
            log.add(t, MissionState.FIND_PATH_PLAN, target=i)
            lw.refresh_mask(grid, poses, i, geometry)
            occ = fuse_occupancy(grid)
            t += cfg.t_plan
            try:
                plan = plan_path(occ, poses[i - 1], pose, nav_params, seed=cfg.seed * 4096 + i)
            except PathNotFound as exc:
                log.add(t, MissionState.FAILED, reason=str(exc))
                return MissionResult(
                    MissionState.FAILED, t, scoops, drive_time, drive_count,
                    refine_total, log, str(exc), gradings,
                )
            duration = follow_path(plan, nav_params)
            t += duration
            drive_time += duration
            drive_count += 1
            log.add(t, MissionState.DRIVING, length=plan.length, duration=duration)

        log.add(t, MissionState.INITIALIZE_WORKSPACE, pose=i)
        lw.refresh_mask(grid, poses, i, geometry)
        ws = lw.init_workspace(grid, pose, geometry, thresholds)
        t += cfg.t_initialize
        log.add(t, MissionState.CHECK_WORKSPACE, pose=i)
        t += cfg.t_check

        sdf_dump = _dump_sdf(grid)
        skip: set = set()
        pose_scoops = 0
        while True:
            try:
                decision = lw.select_dig_dump(
                    grid, ws, sdf_dump, cfg.refine_mean_error, cfg.max_refine_passes, frozenset(skip)
                )
            except DumpDeadlock as exc:
                log.add(t, MissionState.FAILED, reason=str(exc))
                return MissionResult(
                    MissionState.FAILED, t, scoops, drive_time, drive_count,
                    refine_total, log, str(exc), gradings,
                )
            if isinstance(decision, lw.WorkspaceDone):
                break
            if isinstance(decision, lw.Refine):
                dt, vol = _refine_pass(grid, ws, geometry, traj, cfg, log, t, gradings, i)
                t += dt
                ws.zones[ZoneId.FRONT].refined_passes += 1
                refine_total += 1
                continue
            dig_zone, dump_zone = decision
            allowed, floor, loose = _zone_dig_context(grid, ws, dig_zone)
            bounds = geometry.zone_bounds(dig_zone)

            def objective(r, th, _allowed=allowed, _floor=floor, _loose=loose, _b=bounds):
                scoop = simulate_dig(
                    grid, ws.pose, (r, th), traj, _allowed, _floor, _loose, _b[0], _b[1]
                )
                return scoop.volume

            log.add(t, MissionState.FIND_DIG_POINT, pose=i, zone=dig_zone.value)
            r_best, th_best, v_best = optimize_attack(
                objective, bounds, seed=(cfg.seed, i, scoop_seq)
            )
            if v_best < cfg.epsilon_volume:
                # remaining soil is unreachable (e.g. under the future-pose
                # hull); force the zone complete instead of cycling forever
                skip.add(dig_zone)
                log.add(t, MissionState.CHECK_WORKSPACE, forced_complete=dig_zone.value)
                continue

            scoop = simulate_dig(
                grid, ws.pose, (r_best, th_best), traj, allowed, floor, loose, bounds[0], bounds[1]
            )
            removed = apply_scoop(grid, scoop)
            _mark_dug(grid, scoop)
            dig_time = cfg.t_dig_base + cfg.t_dig_per_step * scoop.drag_steps
            log.add(t, MissionState.DIG, volume=removed, termination=scoop.termination)
            ws.last_dig_point = (
                ws.pose[0] + r_best * math.cos(ws.pose[2] + th_best),
                ws.pose[1] + r_best * math.sin(ws.pose[2] + th_best),
            )

            try:
                dump_xy, added = _dump_soil(grid, ws, dump_zone, removed, traj, cfg)
            except DumpDeadlock as exc:
                log.add(t, MissionState.FAILED, reason=str(exc))
                return MissionResult(
                    MissionState.FAILED, t, scoops, drive_time, drive_count,
                    refine_total, log, str(exc), gradings,
                )
            cycle = cfg.t_arm_to_dig + dig_time + cfg.t_dump
            t += cycle
            log.add(t, MissionState.DUMP, volume=added, x=dump_xy[0], y=dump_xy[1])
            scoops.append(
                ScoopRecord(i, dig_zone.value, dump_zone.value, removed, cycle, scoop.termination)
            )
            scoop_seq += 1
            pose_scoops += 1
            if pose_scoops >= cfg.max_scoops_per_pose:
                log.add(t, MissionState.CHECK_WORKSPACE, forced_complete="scoop_budget")
                break

        t += cfg.t_retract
        log.add(t, MissionState.RETRACT_ARM, pose=i)

    log.add(t, MissionState.DONE, poses=len(poses))
    return MissionResult(
        MissionState.DONE, t, scoops, drive_time, drive_count, refine_total, log, None, gradings
    )


def _refine_pass(grid, ws, geometry, traj, cfg, log, t0, gradings, pose_index):
    """One grading pass: cut residual soil above target along radial sweeps.

    Each sweep removes the excess over the target surface in its corridor
    and hauls it to the cheapest dump zone. Returns (elapsed, volume).
    """
    sweeps = plan_refinement(geometry, traj)
    elev = grid.layers[ELEVATION]
    target = grid.layers[TARGET_ELEVATION]
    user = grid.layers[USER_MASK]
    x0, y0, heading = ws.pose
    sdf_dump = _dump_sdf(grid)
    elapsed = 0.0
    total = 0.0
    for sweep in sweeps:
        ang = heading + sweep.bearing
        n = int(math.ceil((sweep.r_start - sweep.r_end) / (grid.resolution / 2.0)))
        rr = np.linspace(sweep.r_start, sweep.r_end, max(n, 2))
        half_w = traj.shovel_width / 2.0
        vx, vy = -math.sin(ang), math.cos(ang)
        cells = set()
        for r in rr:
            cx = x0 + r * math.cos(ang)
            cy = y0 + r * math.sin(ang)
            for off in np.linspace(-half_w, half_w, max(2, int(traj.shovel_width / (grid.resolution / 2)))):
                row, col = grid.world_to_cell(cx + off * vx, cy + off * vy)
                if grid.in_bounds(row, col):
                    cells.add((row, col))
        if not cells:
            continue
        rows = np.array([c[0] for c in sorted(cells)])
        cols = np.array([c[1] for c in sorted(cells)])
        ok = (user[rows, cols] == MaskValue.DIG) & np.isfinite(target[rows, cols])
        rows, cols = rows[ok], cols[ok]
        if len(rows) == 0:
            continue
        depths = np.clip(elev[rows, cols] - target[rows, cols], 0.0, None)
        keep = depths > 1e-6
        rows, cols, depths = rows[keep], cols[keep], depths[keep]
        vol = float(depths.sum() * grid.cell_area())
        if vol < MIN_DEPOSIT_VOLUME:
            continue
        # grading spoil goes to the cheapest dump zone; pick it before
        # cutting so soil is never removed with nowhere to put it
        costs = {
            z: lw.dump_cost(grid, ws, z, ws.last_dig_point, sdf_dump) for z in lw.DUMP_ZONES
        }
        best = min(costs, key=lambda z: (costs[z], z.value))
        if not math.isfinite(costs[best]):
            continue  # nowhere to put it; leave the soil for the next pose
        scoop = ScoopResult(rows, cols, depths, vol, "grading", (0.0, 0.0), False, len(rr))
        apply_scoop(grid, scoop)
        _mark_dug(grid, scoop)
        dump_xy, added = _dump_soil(grid, ws, best, vol, traj, cfg)
        dt = cfg.t_arm_to_dig + cfg.t_dig_base + cfg.t_dig_per_step * len(rr) + cfg.t_dump
        elapsed += dt
        total += vol
        gradings.append(ScoopRecord(pose_index, "refine", best.value, vol, dt, "grading"))
        log.add(t0 + elapsed, MissionState.DIG, refine_volume=vol)
        log.add(t0 + elapsed, MissionState.DUMP, volume=added, x=dump_xy[0], y=dump_xy[1])
    return elapsed, total
