"""PNG rendering of sites, plans, and mission outcomes."""

from __future__ import annotations

import math

import numpy as np
from PIL import Image, ImageDraw

from .grid import ELEVATION, EXCAVATION_MASK, LayeredGrid, MaskValue

# dig violet, permanent dump green, neutral light blue, no-go red,
# boundary dark blue
MASK_COLORS = {
    int(MaskValue.DIG): (148, 0, 211),
    int(MaskValue.PERMANENT_DUMP): (40, 160, 60),
    int(MaskValue.NEUTRAL): (173, 216, 230),
    int(MaskValue.NO_GO): (220, 30, 30),
    int(MaskValue.BOUNDARY): (25, 45, 140),
}


def _elevation_rgb(elev: np.ndarray) -> np.ndarray:
    finite = np.isfinite(elev)
    lo = float(elev[finite].min()) if finite.any() else 0.0
    hi = float(elev[finite].max()) if finite.any() else 1.0
    span = max(hi - lo, 1e-9)
    t = np.clip((elev - lo) / span, 0.0, 1.0)
    t = np.where(finite, t, 0.0)
    # dark brown (deep) to light sand (high)
    r = (80 + t * 150).astype(np.uint8)
    g = (55 + t * 140).astype(np.uint8)
    b = (35 + t * 120).astype(np.uint8)
    rgb = np.stack([r, g, b], axis=-1)
    rgb[~finite] = (255, 0, 255)
    return rgb


def render_site(grid: LayeredGrid, layer: str = ELEVATION, mask_alpha: float = 0.45, scale: int = 3):
    """Render one layer with the excavation mask blended on top."""
    arr = grid.layers[layer]
    rgb = _elevation_rgb(arr).astype(float)
    if EXCAVATION_MASK in grid.layers:
        mask = grid.layers[EXCAVATION_MASK]
        over = np.zeros_like(rgb)
        for value, color in MASK_COLORS.items():
            sel = mask == value
            over[sel] = color
        rgb = (1.0 - mask_alpha) * rgb + mask_alpha * over
    img = Image.fromarray(rgb[::-1].astype(np.uint8))  # row 0 at the bottom
    if scale != 1:
        img = img.resize((img.width * scale, img.height * scale), Image.NEAREST)
    return img


def draw_poses(img: Image.Image, grid: LayeredGrid, poses, scale: int = 3, color=(0, 120, 0)):
    """Overlay base poses (dot + heading tick) and the pose path."""
    draw = ImageDraw.Draw(img)

    def to_px(x, y):
        col = (x - grid.origin[0]) / grid.resolution * scale
        row = img.height - 1 - (y - grid.origin[1]) / grid.resolution * scale
        return col, row

    prev = None
    for x, y, heading in poses:
        px, py = to_px(x, y)
        if prev is not None:
            draw.line([prev, (px, py)], fill=(120, 120, 255), width=1)
        r = max(2, scale)
        draw.ellipse([px - r, py - r, px + r, py + r], fill=color)
        tx, ty = to_px(x + 2.0 * math.cos(heading), y + 2.0 * math.sin(heading))
        draw.line([(px, py), (tx, ty)], fill=color, width=max(1, scale // 2))
        prev = (px, py)
    return img


def render_plan(grid: LayeredGrid, poses, path=None, scale: int = 3) -> Image.Image:
    img = render_site(grid, scale=scale)
    draw_poses(img, grid, poses, scale=scale)
    return img


def save_png(img: Image.Image, path) -> None:
    img.save(path, format="PNG")
