"""Mass-conserving kinematic terrain mutation.

Digging subtracts recorded per-cell depths; dumping spreads the removed
volume as a mixture of bivariate Gaussians along the shovel edge. The
discrete deposit is renormalized so the added volume matches the removed
volume exactly: conservation is load-bearing for the local planner, so
raster quadrature error must not leak soil.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import ELEVATION, LayeredGrid

# Deposits below this volume are numerical noise and are dropped.
MIN_DEPOSIT_VOLUME = 1e-4


@dataclass
class DepositSpec:
    center: tuple[float, float]
    heading: float
    volume: float
    sigma_x: float  # half shovel dim along its forward axis
    sigma_y: float  # half shovel dim along its lateral (edge) axis
    slices: int

    def __post_init__(self):
        if self.volume < 0:
            raise ValueError("deposit volume must be non-negative")
        if self.sigma_x <= 0 or self.sigma_y <= 0:
            raise ValueError("shovel half-dims must be positive")
        if self.slices < 1:
            raise ValueError("slice count must be >= 1")


def apply_scoop(grid: LayeredGrid, scoop) -> float:
    """Lower the elevation layer by the scoop's recorded depths.

    Returns the removed volume for conservation pairing with a deposit.
    """
    if len(scoop.rows) == 0:
        return 0.0
    elev = grid.layers[ELEVATION]
    np.subtract.at(elev, (scoop.rows, scoop.cols), scoop.depths)
    return float(np.sum(scoop.depths) * grid.cell_area())


def deposit_heights(grid: LayeredGrid, spec: DepositSpec):
    """Deposit height field over a local window; returns (r0, c0, heights).

    Heights are renormalized so their raster integral equals spec.volume.
    """
    ch, sh = math.cos(spec.heading), math.sin(spec.heading)
    # Slice means spread along the lateral (edge) axis of the shovel.
    n = spec.slices
    offsets = (np.arange(n) + 0.5) / n * 2.0 * spec.sigma_y - spec.sigma_y
    means = np.stack(
        [
            spec.center[0] - offsets * sh,
            spec.center[1] + offsets * ch,
        ],
        axis=1,
    )

    rot = np.array([[ch, -sh], [sh, ch]])
    cov = rot @ np.diag([spec.sigma_x**2, spec.sigma_y**2]) @ rot.T
    cov_inv = np.linalg.inv(cov)
    det = float(np.linalg.det(cov))
    norm = 1.0 / (2.0 * math.pi * math.sqrt(det))

    pad = spec.sigma_y + 4.0 * max(spec.sigma_x, spec.sigma_y)
    res = grid.resolution
    ox, oy = grid.origin
    c0 = max(0, int(math.floor((spec.center[0] - pad - ox) / res)))
    c1 = min(grid.cols - 1, int(math.ceil((spec.center[0] + pad - ox) / res)))
    r0 = max(0, int(math.floor((spec.center[1] - pad - oy) / res)))
    r1 = min(grid.rows - 1, int(math.ceil((spec.center[1] + pad - oy) / res)))
    if c1 < c0 or r1 < r0:
        raise ValueError("deposit center outside grid")

    xs = ox + np.arange(c0, c1 + 1) * res
    ys = oy + np.arange(r0, r1 + 1) * res
    gx, gy = np.meshgrid(xs, ys)
    h = np.zeros_like(gx)
    for mu in means:
        dx = gx - mu[0]
        dy = gy - mu[1]
        quad = cov_inv[0, 0] * dx * dx + 2 * cov_inv[0, 1] * dx * dy + cov_inv[1, 1] * dy * dy
        h += norm * np.exp(-0.5 * quad)
    h *= spec.volume / n

    integral = float(h.sum() * grid.cell_area())
    if integral > 0:
        h *= spec.volume / integral
    return r0, c0, h


def deposit(grid: LayeredGrid, spec: DepositSpec) -> float:
    """Add a renormalized Gaussian-mixture pile to the elevation layer.

    Returns the deposited volume (0.0 when below the noise floor).
    """
    if spec.volume < MIN_DEPOSIT_VOLUME:
        return 0.0
    r0, c0, h = deposit_heights(grid, spec)
    elev = grid.layers[ELEVATION]
    elev[r0 : r0 + h.shape[0], c0 : c0 + h.shape[1]] += h
    return float(h.sum() * grid.cell_area())
