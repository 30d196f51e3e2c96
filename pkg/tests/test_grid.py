"""Grid substrate: rasterization, distance fields, volumes, file round-trip."""

import numpy as np
import pytest

from digplan.errors import GridError
from digplan.grid import (
    ELEVATION,
    EXCAVATION_MASK,
    LayeredGrid,
    MaskValue,
    OCCUPANCY,
    PolygonSpec,
    distance_field,
    empty_grid,
    fill_holes,
    load_site,
    rasterize_polygons,
    save_site,
    signed_distance,
    volume_between,
)


def square(x0, y0, side):
    return [(x0, y0), (x0 + side, y0), (x0 + side, y0 + side), (x0, y0 + side), (x0, y0)]


def test_rasterize_dig_square_cell_count():
    # 1 m x 1 m dig square on a 0.1 m grid covers exactly 100 cell centers
    polys = [PolygonSpec(square(-0.05, -0.05, 1.0), EXCAVATION_MASK, MaskValue.DIG)]
    grid = rasterize_polygons(polys, 0.1, (0.0, 0.0), (20, 20))
    assert int((grid.mask() == MaskValue.DIG).sum()) == 100


def test_rasterize_empty_defaults():
    grid = rasterize_polygons([], 0.1, (0.0, 0.0), (5, 5))
    assert np.all(grid.mask() == MaskValue.NEUTRAL)
    assert np.all(grid.layers[OCCUPANCY] == 0.0)


def test_rasterize_later_polygon_wins():
    polys = [
        PolygonSpec(square(-0.05, -0.05, 1.0), EXCAVATION_MASK, MaskValue.DIG),
        PolygonSpec(square(0.45, -0.05, 1.0), EXCAVATION_MASK, MaskValue.NO_GO),
    ]
    grid = rasterize_polygons(polys, 0.1, (0.0, 0.0), (20, 20))
    gx, gy = grid.cell_centers()
    overlap = (gx > 0.45) & (gx < 0.95) & (gy > -0.05) & (gy < 0.95)
    assert np.all(grid.mask()[overlap] == MaskValue.NO_GO)


def test_rasterize_rejects_self_intersecting_ring():
    bowtie = [(0, 0), (1, 1), (1, 0), (0, 1), (0, 0)]
    with pytest.raises(GridError, match="polygon 0"):
        rasterize_polygons([PolygonSpec(bowtie, EXCAVATION_MASK, MaskValue.DIG)], 0.1, (0, 0), (20, 20))


def _mask_grid(mask_values):
    grid = empty_grid(0.1, (0.0, 0.0), mask_values.shape, (EXCAVATION_MASK,))
    grid.layers[EXCAVATION_MASK][:] = mask_values
    return grid


def test_signed_distance_interior_and_axis():
    mask = np.full((10, 10), float(MaskValue.NEUTRAL))
    mask[0, 0] = MaskValue.PERMANENT_DUMP
    sdf = signed_distance(_mask_grid(mask), [MaskValue.PERMANENT_DUMP])
    assert sdf[0, 0] == 0.0
    assert sdf[0, 5] == pytest.approx(0.5)


def test_signed_distance_matches_brute_force():
    rng = np.random.default_rng(7)
    for _ in range(5):
        mask = np.where(rng.random((20, 20)) < 0.1, float(MaskValue.DIG), float(MaskValue.NEUTRAL))
        if not (mask == MaskValue.DIG).any():
            mask[3, 4] = MaskValue.DIG
        sdf = signed_distance(_mask_grid(mask), [MaskValue.DIG])
        rows, cols = np.nonzero(mask == MaskValue.DIG)
        for r in range(20):
            for c in range(20):
                d = np.hypot(rows - r, cols - c).min() * 0.1
                assert sdf[r, c] == pytest.approx(d, abs=1e-9)


def test_signed_distance_empty_set_is_infinite():
    mask = np.full((5, 5), float(MaskValue.NEUTRAL))
    sdf = signed_distance(_mask_grid(mask), [MaskValue.DIG])
    assert np.all(np.isinf(sdf))


def test_signed_distance_lipschitz():
    rng = np.random.default_rng(3)
    mask = np.where(rng.random((15, 15)) < 0.2, float(MaskValue.DIG), float(MaskValue.NEUTRAL))
    sdf = signed_distance(_mask_grid(mask), [MaskValue.DIG])
    diag = 0.1 * np.sqrt(2)
    assert np.all(np.abs(np.diff(sdf, axis=0)) <= 0.1 + diag + 1e-9)
    assert np.all(np.abs(np.diff(sdf, axis=1)) <= 0.1 + diag + 1e-9)


def test_volume_between_examples():
    grid = empty_grid(0.1, (0.0, 0.0), (10, 10), ("a", "b"))
    grid.layers["a"][:] = 1.0
    grid.layers["b"][:] = 0.0
    assert volume_between(grid, "a", "a") == 0.0
    assert volume_between(grid, "a", "b") == pytest.approx(1.0)
    assert volume_between(grid, "a", "b") == -volume_between(grid, "b", "a")


def test_volume_between_random_matches_summation():
    rng = np.random.default_rng(11)
    grid = empty_grid(0.1, (0.0, 0.0), (8, 8), ("a", "b"))
    grid.layers["a"][:] = rng.normal(size=(8, 8))
    grid.layers["b"][:] = rng.normal(size=(8, 8))
    region = rng.random((8, 8)) < 0.5
    expect = float(((grid.layers["a"] - grid.layers["b"])[region]).sum() * 0.01)
    assert volume_between(grid, "a", "b", region) == pytest.approx(expect, rel=1e-12)


def test_volume_between_flags_nan_cells():
    grid = empty_grid(0.1, (0.0, 0.0), (4, 4), ("a", "b"))
    grid.layers["a"][:] = 0.0
    grid.layers["b"][:] = 0.0
    grid.layers["a"][2, 3] = np.nan
    with pytest.raises(GridError, match=r"\(2, 3\)"):
        volume_between(grid, "a", "b")


def test_fill_holes_examples():
    grid = empty_grid(0.1, (0.0, 0.0), (5, 5), ("z",))
    grid.layers["z"][:] = 2.0
    assert np.array_equal(fill_holes(grid, "z").layers["z"], grid.layers["z"])
    grid.layers["z"][2, 2] = np.nan
    assert fill_holes(grid, "z").layers["z"][2, 2] == pytest.approx(2.0)


def test_fill_holes_line_between_plateaus_monotone():
    grid = empty_grid(0.1, (0.0, 0.0), (3, 5), ("z",))
    grid.layers["z"][:, 0] = 0.0
    grid.layers["z"][:, 4] = 1.0
    grid.layers["z"][:, 1:4] = np.nan
    filled = fill_holes(grid, "z").layers["z"]
    row = filled[1]
    assert np.all(np.isfinite(row))
    assert np.all(np.diff(row) >= 0)
    assert np.all((row[1:4] >= 0) & (row[1:4] <= 1))
    assert 0.0 < row[2] < 1.0  # the middle blends both plateaus


def test_fill_holes_all_nan_errors():
    grid = empty_grid(0.1, (0.0, 0.0), (3, 3), ("z",))
    with pytest.raises(GridError):
        fill_holes(grid, "z")


def test_distance_field_empty():
    assert np.all(np.isinf(distance_field(np.zeros((3, 3), dtype=bool), 0.1)))


def test_site_roundtrip_bit_identical(tmp_path):
    polys = [PolygonSpec(square(-0.05, -0.05, 1.0), EXCAVATION_MASK, MaskValue.DIG)]
    grid = rasterize_polygons(polys, 0.1, (0.25, -3.0), (20, 20))
    grid.layers[ELEVATION][:] = np.random.default_rng(0).normal(size=(20, 20))
    save_site(grid, tmp_path / "site")
    back = load_site(tmp_path / "site")
    assert back.resolution == grid.resolution
    assert back.origin == grid.origin
    for name, layer in grid.layers.items():
        assert np.array_equal(back.layers[name], layer, equal_nan=True)
    # saving again is byte-identical
    save_site(back, tmp_path / "site2")
    for f in sorted((tmp_path / "site").iterdir()):
        assert (tmp_path / "site2" / f.name).read_bytes() == f.read_bytes()


def test_layer_dims_must_agree():
    with pytest.raises(GridError, match="dims"):
        LayeredGrid(0.1, (0, 0), {"a": np.zeros((2, 2)), "b": np.zeros((3, 2))})
