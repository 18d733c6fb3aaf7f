"""RGB rasters, PNG I/O and the equirectangular pixel <-> lat/lon mapping."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Tuple

import numpy as np
from PIL import Image

# (lat_north, lat_south, lon_west, lon_east)
Extent = Tuple[float, float, float, float]
FULL_GLOBE: Extent = (90.0, -90.0, -180.0, 180.0)


@dataclass(frozen=True, eq=False)
class RasterImage:
    pixels: np.ndarray  # (height, width, 3) uint8

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 3 or px.shape[2] != 3 or px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError(f"pixels must have shape (H, W, 3), got {px.shape}")
        object.__setattr__(self, "pixels", np.ascontiguousarray(px, dtype=np.uint8))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @classmethod
    def blank(cls, width: int, height: int, rgb=(255, 255, 255)) -> "RasterImage":
        px = np.empty((height, width, 3), dtype=np.uint8)
        px[...] = rgb
        return cls(px)

    def copy(self) -> "RasterImage":
        return RasterImage(self.pixels.copy())

    def __eq__(self, other):
        if not isinstance(other, RasterImage):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and np.array_equal(self.pixels, other.pixels)


def write_png(img: RasterImage, path) -> None:
    """Write an 8-bit RGB PNG atomically (temp file, then rename)."""
    path = Path(path)
    tmp = path.with_name(f".{path.name}.tmp{os.getpid()}")
    try:
        Image.fromarray(img.pixels, mode="RGB").save(tmp, format="PNG")
        os.replace(tmp, path)
    except OSError as exc:
        tmp.unlink(missing_ok=True)
        raise OSError(f"cannot write PNG to {path}: {exc.strerror or exc}") from exc


def read_png(path) -> RasterImage:
    with Image.open(path) as im:
        return RasterImage(np.asarray(im.convert("RGB")))


def pixel_to_geo(p, width: int, height: int, extent: Extent = FULL_GLOBE) -> tuple[float, float]:
    """Centre of pixel ``p = (x, y)`` as (lat, lon)."""
    x, y = p
    if not (0 <= x < width and 0 <= y < height):
        raise ValueError(f"pixel {p} outside {width}x{height} frame")
    north, south, west, east = extent
    lon = west + (x + 0.5) * (east - west) / width
    lat = north - (y + 0.5) * (north - south) / height
    return (lat, lon)


def geo_to_pixel(g, width: int, height: int, extent: Extent = FULL_GLOBE) -> tuple[int, int]:
    """Pixel whose centre is nearest to ``g = (lat, lon)``; exact ties go to the lower index.

    Results outside the frame are clamped onto it.
    """
    lat, lon = g
    if not (math.isfinite(lat) and math.isfinite(lon)):
        raise ValueError(f"non-finite coordinate {g}")
    north, south, west, east = extent
    u = (lon - west) * width / (east - west)
    v = (north - lat) * height / (north - south)
    x = min(max(math.ceil(u) - 1, 0), width - 1)
    y = min(max(math.ceil(v) - 1, 0), height - 1)
    return (x, y)


def pixels_to_geo(xs, ys, width: int, height: int, extent: Extent = FULL_GLOBE):
    """Vectorised pixel_to_geo; returns (lats, lons) arrays."""
    north, south, west, east = extent
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    lons = west + (xs + 0.5) * (east - west) / width
    lats = north - (ys + 0.5) * (north - south) / height
    return lats, lons


def geos_to_pixels(lats, lons, width: int, height: int, extent: Extent = FULL_GLOBE):
    """Vectorised geo_to_pixel; returns (xs, ys) integer arrays."""
    north, south, west, east = extent
    u = (np.asarray(lons, dtype=np.float64) - west) * width / (east - west)
    v = (north - np.asarray(lats, dtype=np.float64)) * height / (north - south)
    xs = np.clip(np.ceil(u).astype(np.int64) - 1, 0, width - 1)
    ys = np.clip(np.ceil(v).astype(np.int64) - 1, 0, height - 1)
    return xs, ys
