"""Paint Beaufort colours onto an equirectangular raster and draw coastlines."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .beaufort import DEFAULT_TABLE, BeaufortTable, levels_of
from .grid import WindGrid
from .raster import FULL_GLOBE, Extent, RasterImage, geos_to_pixels


@dataclass(frozen=True)
class RenderConfig:
    width: int = 3510
    height: int = 1755
    overlay_coastlines: bool = True
    coastline_rgb: tuple[int, int, int] = (0, 0, 0)
    coastline_thickness: int = 1

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("raster dimensions must be >= 1")
        if self.coastline_thickness < 1:
            raise ValueError("coastline_thickness must be >= 1")


def render(grid: WindGrid, cfg: RenderConfig = RenderConfig(), table: BeaufortTable = DEFAULT_TABLE) -> RasterImage:
    """Nearest-neighbour upsample of the grid's Beaufort colours. NaN cells take level 0."""
    levels = levels_of(grid.values, table)
    # integer form of floor((p + 0.5) * n / size) keeps the mapping exact
    rows = ((2 * np.arange(cfg.height) + 1) * grid.nlat) // (2 * cfg.height)
    cols = ((2 * np.arange(cfg.width) + 1) * grid.nlon) // (2 * cfg.width)
    return RasterImage(table.colors[levels[np.ix_(rows, cols)]])


def line_pixels(x0: int, y0: int, x1: int, y1: int) -> tuple[np.ndarray, np.ndarray]:
    """8-connected digital line between two pixels, endpoints included."""
    dx, dy = x1 - x0, y1 - y0
    n = max(abs(dx), abs(dy))
    if n == 0:
        return np.array([x0]), np.array([y0])
    t = np.arange(n + 1)
    xs = x0 + (2 * t * dx + n) // (2 * n)
    ys = y0 + (2 * t * dy + n) // (2 * n)
    return xs, ys


def _stamp(mask: np.ndarray, xs: np.ndarray, ys: np.ndarray, thickness: int) -> None:
    h, w = mask.shape
    offsets = range(-((thickness - 1) // 2), thickness // 2 + 1)
    for oy in offsets:
        for ox in offsets:
            x = xs + ox
            y = ys + oy
            ok = (x >= 0) & (x < w) & (y >= 0) & (y < h)
            mask[y[ok], x[ok]] = True


def coastline_mask(width: int, height: int, boundaries, thickness: int = 1, extent: Extent | None = None) -> np.ndarray:
    """Boolean mask of every rasterised polygon edge in ``boundaries``."""
    extent = extent or FULL_GLOBE
    mask = np.zeros((height, width), dtype=bool)
    if boundaries is None:
        return mask
    for feature in boundaries.features:
        for polygon in feature.polygons:
            for ring in polygon:
                pts = np.asarray(ring, dtype=np.float64)
                xs, ys = geos_to_pixels(pts[:, 0], pts[:, 1], width, height, extent)
                for k in range(len(pts) - 1):
                    lon_a, lon_b = pts[k, 1], pts[k + 1, 1]
                    # seams introduced by antimeridian splitting are not coastline
                    if lon_a == lon_b and abs(lon_a) == 180.0:
                        continue
                    lx, ly = line_pixels(int(xs[k]), int(ys[k]), int(xs[k + 1]), int(ys[k + 1]))
                    _stamp(mask, lx, ly, thickness)
    return mask


def overlay_coastlines(img: RasterImage, boundaries, cfg: RenderConfig = RenderConfig(), extent: Extent | None = None) -> RasterImage:
    mask = coastline_mask(img.width, img.height, boundaries, cfg.coastline_thickness, extent)
    out = img.pixels.copy()
    out[mask] = cfg.coastline_rgb
    return RasterImage(out)
