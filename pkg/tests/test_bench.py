"""Benchmark task generation and scoring."""

import math

import numpy as np
import pytest

from digplan.bench import (
    BenchScore,
    FAMILIES,
    MAX_REACH,
    coverage_cells,
    coverage_fraction_slow,
    generate_task,
    path_efficiency,
    run_task,
    score_plan,
    summarize,
    workspace_efficiency,
)


def test_generate_task_deterministic():
    a = generate_task("Foundations", 5)
    b = generate_task("Foundations", 5)
    assert a.side == b.side
    assert np.array_equal(a.diggable, b.diggable)
    assert np.array_equal(a.obstacle, b.obstacle)


def test_exterior_obstacle_is_interior_building():
    # same seed gives the same silhouette across families
    fnd = generate_task("Foundations", 3)
    ext = generate_task("ExteriorFoundations", 3)
    assert fnd.side == ext.side
    assert np.array_equal(ext.obstacle, fnd.diggable)
    assert not (ext.diggable & fnd.diggable).any()


def test_traversable_variant_has_no_obstacle():
    ext = generate_task("ExteriorFoundations", 3)
    trav = generate_task("ExteriorFoundationsTraversable", 3)
    assert np.array_equal(trav.diggable, ext.diggable)
    assert not trav.obstacle.any()


def test_side_validation():
    with pytest.raises(ValueError, match="outside"):
        generate_task("Foundations", 0, side=150.0)
    with pytest.raises(ValueError, match="unknown family"):
        generate_task("Lawns", 0)


def test_path_efficiency_example():
    poses = [(0.0, 0.0, 0.0), (10.0, 0.0, 0.0)]
    assert path_efficiency(poses, 100.0) == pytest.approx(1.0)
    assert path_efficiency(poses[:1], 100.0) == 0.0


def test_workspace_efficiency_substitution():
    area = 0.5 * math.pi * MAX_REACH**2
    assert workspace_efficiency(1, area) == pytest.approx(1.0)
    assert workspace_efficiency(4, 2 * area) == pytest.approx(2.0)


def test_coverage_fast_matches_slow():
    task = generate_task("Foundations", 1, side=25.0)
    rng = np.random.default_rng(0)
    rows, cols = np.nonzero(task.diggable)
    poses = []
    for _ in range(4):
        i = int(rng.integers(len(rows)))
        x = task.grid.origin[0] + cols[i] * task.grid.resolution
        y = task.grid.origin[1] + rows[i] * task.grid.resolution
        poses.append((x - 5.0, y, float(rng.uniform(-math.pi, math.pi))))
    fast = float(coverage_cells(task, poses).sum()) / len(rows)
    slow = coverage_fraction_slow(task, poses)
    assert fast == pytest.approx(slow, abs=1e-12)


def test_run_task_scores_foundations():
    task = generate_task("Foundations", 2, side=22.0)
    score = run_task(task, n_samples=0)
    assert score.success
    assert score.n_poses > 0
    assert 0.0 < score.coverage <= 1.0
    assert score.workspace_efficiency > 0.0


def test_score_plan_counts_poses():
    task = generate_task("Foundations", 4, side=20.0)
    score = score_plan(task, [(0.0, 0.0, 0.0)])
    assert score.n_poses == 1
    assert score.coverage == 0.0  # pose far outside the dig area


def test_summarize_shapes():
    scores = [
        BenchScore("Foundations", 0, 30.0, True, 5, 1.0, 1.2, 0.9, 100.0),
        BenchScore("Foundations", 1, 30.0, False, 0, 0.0, 0.0, 0.0, 100.0, "failed"),
    ]
    out = summarize(scores)
    assert out["Foundations"]["n"] == 2
    assert out["Foundations"]["success_rate"] == 0.5
    assert out["Foundations"]["coverage_mean"] == pytest.approx(0.9)
