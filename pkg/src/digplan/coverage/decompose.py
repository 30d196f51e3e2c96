"""Boustrophedon decomposition of a diggable region in a rotated frame.

The region is resampled (nearest neighbor) into a raster aligned with the
sweep direction, then swept column by column; connectivity changes between
consecutive columns open and close cells.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..grid import LayeredGrid


@dataclass
class Frame:
    """Rotated working frame: x' is the sweep axis, lanes run along y'."""

    theta: float
    pivot: tuple[float, float]
    origin: tuple[float, float]  # rotated coords of raster cell (0, 0)
    resolution: float

    def to_rotated(self, x, y):
        c, s = math.cos(self.theta), math.sin(self.theta)
        dx = np.asarray(x) - self.pivot[0]
        dy = np.asarray(y) - self.pivot[1]
        return c * dx + s * dy, -s * dx + c * dy

    def to_world(self, xp, yp):
        c, s = math.cos(self.theta), math.sin(self.theta)
        xp = np.asarray(xp)
        yp = np.asarray(yp)
        return self.pivot[0] + c * xp - s * yp, self.pivot[1] + s * xp + c * yp

    def cell_center(self, row, col):
        return (
            self.origin[0] + np.asarray(col) * self.resolution,
            self.origin[1] + np.asarray(row) * self.resolution,
        )

    def cell_of(self, xp, yp):
        col = int(round((xp - self.origin[0]) / self.resolution))
        row = int(round((yp - self.origin[1]) / self.resolution))
        return row, col


@dataclass
class Cell:
    """One monotone cell: contiguous columns, one row interval per column."""

    id: int
    slabs: list = field(default_factory=list)  # (col, row_lo, row_hi) inclusive

    @property
    def col_range(self):
        return self.slabs[0][0], self.slabs[-1][0]

    def area(self, resolution: float) -> float:
        n = sum(hi - lo + 1 for _, lo, hi in self.slabs)
        return n * resolution * resolution

    def centroid_rc(self):
        total = 0
        sr = 0.0
        sc = 0.0
        for col, lo, hi in self.slabs:
            n = hi - lo + 1
            total += n
            sc += n * col
            sr += n * (lo + hi) / 2.0
        return sr / total, sc / total

    def corners_rc(self):
        """Four extreme corners as (row, col): both ends of first/last slab."""
        c0, lo0, hi0 = self.slabs[0]
        c1, lo1, hi1 = self.slabs[-1]
        return [(lo0, c0), (hi0, c0), (lo1, c1), (hi1, c1)]


def rotated_mask(grid: LayeredGrid, diggable: np.ndarray, theta: float) -> tuple[Frame, np.ndarray]:
    """Resample a boolean mask into a frame rotated by theta.

    Sampling is inverse nearest-neighbor: each rotated cell looks up the
    original cell under its center, so no diggable cell is smeared.
    """
    rows, cols = np.nonzero(diggable)
    if len(rows) == 0:
        raise ValueError("no diggable cells")
    res = grid.resolution
    xs = grid.origin[0] + cols * res
    ys = grid.origin[1] + rows * res
    pivot = (float(xs.mean()), float(ys.mean()))
    frame = Frame(theta=theta, pivot=pivot, origin=(0.0, 0.0), resolution=res)
    xp, yp = frame.to_rotated(xs, ys)
    pad = 1.5 * res
    frame.origin = (float(xp.min() - pad), float(yp.min() - pad))
    n_cols = int(math.ceil((xp.max() + pad - frame.origin[0]) / res)) + 1
    n_rows = int(math.ceil((yp.max() + pad - frame.origin[1]) / res)) + 1

    rr = np.arange(n_rows)
    cc = np.arange(n_cols)
    gc, gr = np.meshgrid(cc, rr)
    cx, cy = frame.cell_center(gr, gc)
    wx, wy = frame.to_world(cx, cy)
    oc = np.round((wx - grid.origin[0]) / res).astype(int)
    orow = np.round((wy - grid.origin[1]) / res).astype(int)
    inb = (orow >= 0) & (orow < grid.rows) & (oc >= 0) & (oc < grid.cols)
    out = np.zeros((n_rows, n_cols), dtype=bool)
    out[inb] = diggable[orow[inb], oc[inb]]
    return frame, out


def _runs(column: np.ndarray):
    """Inclusive (lo, hi) row intervals of True runs in one raster column."""
    idx = np.nonzero(column)[0]
    if len(idx) == 0:
        return []
    breaks = np.nonzero(np.diff(idx) > 1)[0]
    starts = np.concatenate([[0], breaks + 1])
    ends = np.concatenate([breaks, [len(idx) - 1]])
    return [(int(idx[s]), int(idx[e])) for s, e in zip(starts, ends)]


def decompose(grid: LayeredGrid, diggable: np.ndarray, theta: float):
    """Sweep the rotated mask and return (frame, cells, label_map).

    label_map holds the owning cell id per rotated raster cell (-1 outside).
    A cell closes and new ones open whenever the set of overlapping runs
    between consecutive columns is not one-to-one.
    """
    frame, mask = rotated_mask(grid, diggable, theta)
    label = np.full(mask.shape, -1, dtype=int)
    cells: list[Cell] = []
    active: list[tuple[tuple[int, int], int]] = []  # (run, cell id) in prev column

    for col in range(mask.shape[1]):
        runs = _runs(mask[:, col])
        # overlap matrix between previous runs and current runs
        links = []
        for i, (prun, _) in enumerate(active):
            row = [j for j, run in enumerate(runs) if run[0] <= prun[1] and prun[0] <= run[1]]
            links.append(row)
        back = [[] for _ in runs]
        for i, row in enumerate(links):
            for j in row:
                back[j].append(i)

        nxt: list[tuple[tuple[int, int], int]] = []
        for j, run in enumerate(runs):
            prev = back[j]
            if len(prev) == 1 and len(links[prev[0]]) == 1:
                cid = active[prev[0]][1]  # simple continuation
            else:
                cid = len(cells)  # open (fresh, split child, or merge result)
                cells.append(Cell(id=cid))
            cells[cid].slabs.append((col, run[0], run[1]))
            label[run[0] : run[1] + 1, col] = cid
            nxt.append((run, cid))
        active = nxt

    return frame, cells, label
