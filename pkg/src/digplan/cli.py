"""Command-line surface: plan, simulate, bench, render."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .bench import FAMILIES, generate_task, run_task, score_plan, summarize
from .coverage.lanes import LaneParams
from .coverage.orientation import plan_site
from .coverage.plan import from_component_plans, load_plan, save_plan
from .errors import DigPlanError
from .grid import MaskValue, load_site, save_site
from .local import USER_MASK
from .mission import MissionConfig, MissionResult, cycle_metrics, run_mission
from .render import draw_poses, render_site, save_png


_AUTO = "@auto"


def _site_masks(grid):
    user = grid.layers[USER_MASK]
    return user == MaskValue.DIG, user == MaskValue.NO_GO


def cmd_plan(args) -> int:
    grid = load_site(args.site)
    diggable, obstacle = _site_masks(grid)
    plans, order = plan_site(
        grid, diggable, params=LaneParams(), obstacle_world=obstacle, n_samples=args.samples
    )
    plan = from_component_plans(grid.resolution, plans, order)
    save_plan(plan, args.output)
    poses = plan.poses
    n = len(poses)
    area = sum(p.area for p in plans)
    coverage = sum(p.coverage * p.area for p in plans) / area
    pts = np.asarray([(p[0], p[1]) for p in poses])
    travel = float(np.hypot(np.diff(pts[:, 0]), np.diff(pts[:, 1])).sum()) if n > 1 else 0.0
    s_p = travel / max(area, 1e-9) ** 0.5
    s_w = n * 0.5 * np.pi * 7.5**2 / area
    print(f"poses={n} S_p={s_p:.3f} S_w={s_w:.3f} coverage={coverage:.3f}")
    return 0


def cmd_simulate(args) -> int:
    grid = load_site(args.site)
    outdir = Path(args.output)
    outdir.mkdir(parents=True, exist_ok=True)
    if args.plan == _AUTO:
        diggable, obstacle = _site_masks(grid)
        plans, order = plan_site(
            grid, diggable, params=LaneParams(), obstacle_world=obstacle, n_samples=args.samples
        )
        plan = from_component_plans(grid.resolution, plans, order)
        save_plan(plan, outdir / "plan.json")
    else:
        plan = load_plan(args.plan)
    config = MissionConfig.from_ini(args.config) if args.config else MissionConfig(seed=args.seed)
    save_site(grid, outdir / "initial_site")
    result = run_mission(grid, plan.poses, config)
    result.log.write(outdir / "mission.log")
    save_site(grid, outdir / "final_site")
    metrics = cycle_metrics(result)
    metrics["state"] = result.state.value
    with open(outdir / "metrics.json", "w") as fh:
        json.dump(metrics, fh, sort_keys=True, indent=1)
    print(f"state={result.state.value} scoops={metrics['n_scoops']} time={metrics['total_time']:.1f}")
    return 0 if result.state.value == "Done" else 1


def cmd_bench(args) -> int:
    if args.family not in FAMILIES:
        raise DigPlanError(f"unknown family {args.family!r}; choose from {', '.join(FAMILIES)}")
    rows = []
    for k in range(args.count):
        task = generate_task(args.family, args.seed + k, args.side)
        score = run_task(task, n_samples=args.samples)
        rows.append(score)
    with open(args.output, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["seed", "family", "side", "success", "S_p", "S_w", "coverage"])
        for s in rows:
            writer.writerow(
                [
                    s.seed,
                    s.family,
                    f"{s.side:.6f}",
                    int(s.success),
                    f"{s.path_efficiency:.6f}",
                    f"{s.workspace_efficiency:.6f}",
                    f"{s.coverage:.6f}",
                ]
            )
    for family, entry in summarize(rows).items():
        print(
            f"{family}: n={entry['n']} success={entry['success_rate']:.2f} "
            f"S_p={entry['path_efficiency_mean']:.2f} S_w={entry['workspace_efficiency_mean']:.2f} "
            f"coverage={entry['coverage_mean']:.3f}"
        )
    return 0


def cmd_render(args) -> int:
    target = Path(args.target)
    poses = []
    if target.is_dir() and (target / "site.meta").exists():
        grid = load_site(target)
    elif target.is_dir() and (target / "final_site" / "site.meta").exists():
        grid = load_site(target / "final_site")
        plan_file = target / "plan.json"
        if plan_file.exists():
            poses = load_plan(plan_file).poses
    elif target.suffix == ".json":
        if not args.site:
            raise DigPlanError("rendering a plan file needs --site for the terrain")
        grid = load_site(args.site)
        poses = load_plan(target).poses
    else:
        raise DigPlanError(f"cannot render {target}: expected site dir, log dir, or plan json")
    img = render_site(grid, scale=args.scale)
    if poses:
        draw_poses(img, grid, poses, scale=args.scale)
    save_png(img, args.output)
    print(f"wrote {args.output} ({img.width}x{img.height})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="digplan", description="excavation planning toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="plan a site and write the pose plan")
    p.add_argument("site")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--samples", type=int, default=36, help="orientation samples (0 = principal axis)")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("simulate", help="run a mission on a site")
    p.add_argument("site")
    p.add_argument("plan", help="plan json, or -auto to plan first")
    p.add_argument("-o", "--output", required=True, help="log directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples", type=int, default=36)
    p.add_argument("--config", default=None, help="mission INI file")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bench", help="generate and score benchmark tasks")
    p.add_argument("family")
    p.add_argument("-n", "--count", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--side", type=float, default=None)
    p.add_argument("--samples", type=int, default=12)
    p.add_argument("-o", "--output", required=True, help="CSV path")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("render", help="render a site, plan, or mission log directory")
    p.add_argument("target")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--site", default=None)
    p.add_argument("--scale", type=int, default=3)
    p.set_defaults(func=cmd_render)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    # argparse would otherwise read the literal -auto plan token as a flag
    argv = [_AUTO if a == "-auto" else a for a in argv]
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DigPlanError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
