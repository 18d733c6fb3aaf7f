"""Sparse position and outline tracking.

Masks one colour group of a rendered heatmap, traces each connected region,
spends a per-colour point budget across regions in proportion to area, and
summarises every region by K-Means centroids that are snapped back inside
the region. Pixels are then mapped to latitude/longitude.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np
from scipy import ndimage

from .beaufort import DEFAULT_TABLE, GROUPS, BeaufortTable
from .raster import FULL_GLOBE, Extent, RasterImage, geo_to_pixel, pixel_to_geo, pixels_to_geo

__all__ = [
    "HSVRange",
    "KMeansConfig",
    "SpotConfig",
    "BitMask",
    "Contour",
    "SpotRegion",
    "SpotResult",
    "color_mask",
    "find_contours",
    "allocate_points",
    "representative_points",
    "kmeans",
    "kmeans_fit",
    "pixel_to_geo",
    "geo_to_pixel",
    "run_spot",
    "annotate",
    "rgb_to_hsv",
]

_EIGHT = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class HSVRange:
    """Hue in degrees (half-open, wraps when lo > hi), saturation/value in percent (inclusive)."""

    hue: Optional[tuple[float, float]] = None
    sat: tuple[float, float] = (0.0, 100.0)
    val: tuple[float, float] = (0.0, 100.0)

    def contains(self, h: np.ndarray, s: np.ndarray, v: np.ndarray) -> np.ndarray:
        ok = (s >= self.sat[0]) & (s <= self.sat[1]) & (v >= self.val[0]) & (v <= self.val[1])
        if self.hue is not None:
            lo, hi = self.hue
            if lo <= hi:
                ok &= (h >= lo) & (h < hi)
            else:
                ok &= (h >= lo) | (h < hi)
        return ok


DEFAULT_HSV = {
    "red": HSVRange(hue=(330.0, 15.0), sat=(30.0, 100.0), val=(30.0, 100.0)),
    "yellow": HSVRange(hue=(40.0, 70.0), sat=(30.0, 100.0), val=(30.0, 100.0)),
    "green": HSVRange(hue=(80.0, 160.0), sat=(30.0, 100.0), val=(30.0, 100.0)),
    "white": HSVRange(hue=None, sat=(0.0, 12.0), val=(85.0, 100.0)),
}


@dataclass(frozen=True)
class KMeansConfig:
    max_iter: int = 100
    tol: float = 1e-4
    seed: int = 0
    # regions larger than this are clustered on a seeded subsample
    max_samples: int = 20_000

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be > 0")
        if self.max_samples < 1:
            raise ValueError("max_samples must be >= 1")


@dataclass(frozen=True)
class SpotConfig:
    match_mode: str = "exact"  # "exact" | "hsv"
    hsv_ranges: Mapping[str, HSVRange] = field(default_factory=lambda: dict(DEFAULT_HSV))
    min_area: int = 50
    erosion_radius: int = 1
    point_budget_per_color: int = 20
    max_points_per_region: int = 10
    kmeans: KMeansConfig = KMeansConfig()
    table: BeaufortTable = DEFAULT_TABLE

    def __post_init__(self):
        if self.match_mode not in ("exact", "hsv"):
            raise ValueError(f"match_mode must be 'exact' or 'hsv', got {self.match_mode!r}")
        if self.point_budget_per_color < 1:
            raise ValueError("point_budget_per_color must be >= 1")
        if self.max_points_per_region < 1:
            raise ValueError("max_points_per_region must be >= 1")
        if self.min_area < 0 or self.erosion_radius < 0:
            raise ValueError("min_area and erosion_radius must be >= 0")

    def to_dict(self) -> dict:
        return {
            "match_mode": self.match_mode,
            "min_area": self.min_area,
            "erosion_radius": self.erosion_radius,
            "point_budget_per_color": self.point_budget_per_color,
            "max_points_per_region": self.max_points_per_region,
            "kmeans": {
                "max_iter": self.kmeans.max_iter,
                "tol": self.kmeans.tol,
                "seed": self.kmeans.seed,
                "max_samples": self.kmeans.max_samples,
            },
        }


# A BitMask is a (height, width) bool ndarray.
BitMask = np.ndarray


@dataclass(frozen=True, eq=False)
class Contour:
    boundary: tuple[tuple[int, int], ...]  # (x, y), traced clockwise from the top-left pixel
    area_px: int
    region_id: int
    origin: tuple[int, int] = (0, 0)  # (x, y) of region[0, 0]
    region: Optional[np.ndarray] = field(default=None, repr=False)

    def region_pixels(self) -> tuple[np.ndarray, np.ndarray]:
        """Global (xs, ys) of the region's pixels in row-major order."""
        ys, xs = np.nonzero(self.region)
        return xs + self.origin[0], ys + self.origin[1]


# -- masks -----------------------------------------------------------------------


def rgb_to_hsv(pixels: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Hue in degrees [0, 360), saturation and value in percent."""
    rgb = pixels.astype(np.float64) / 255.0
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    mx = rgb.max(axis=-1)
    mn = rgb.min(axis=-1)
    delta = mx - mn
    safe = np.where(delta > 0, delta, 1.0)
    h = np.zeros_like(mx)
    h = np.where(mx == r, ((g - b) / safe) % 6.0, h)
    h = np.where((mx == g) & (mx != r), (b - r) / safe + 2.0, h)
    h = np.where((mx == b) & (mx != r) & (mx != g), (r - g) / safe + 4.0, h)
    h = np.where(delta > 0, (h * 60.0) % 360.0, 0.0)
    s = np.where(mx > 0, delta / np.where(mx > 0, mx, 1.0), 0.0) * 100.0
    return h, s, mx * 100.0


def _packed(rgb) -> np.ndarray:
    a = np.asarray(rgb, dtype=np.uint32)
    return (a[..., 0] << 16) | (a[..., 1] << 8) | a[..., 2]


def color_mask(img: RasterImage, color: str, cfg: SpotConfig = SpotConfig()) -> BitMask:
    if color not in GROUPS:
        raise ValueError(f"unknown colour group {color!r}; expected one of {', '.join(GROUPS)}")
    if cfg.match_mode == "exact":
        wanted = _packed(cfg.table.group_rgbs(color))
        return np.isin(_packed(img.pixels), wanted)
    h, s, v = rgb_to_hsv(img.pixels)
    return cfg.hsv_ranges[color].contains(h, s, v)


# -- contours --------------------------------------------------------------------

# clockwise in image coordinates (y grows downwards), starting east
_DIRS = ((1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1))
_DIR_INDEX = {d: i for i, d in enumerate(_DIRS)}


def _trace_boundary(region: np.ndarray) -> list[tuple[int, int]]:
    """Moore-neighbour trace of a single 8-connected region; returns local (x, y)."""
    padded = np.pad(region, 1)
    ys, xs = np.nonzero(padded)
    start = (int(xs[0]), int(ys[0]))  # nonzero is row-major, so this is top-left
    boundary = [start]
    cur = start
    back = 4  # the west neighbour of the top-left pixel is background
    second = None
    limit = 4 * int(region.sum()) + 8
    for _ in range(limit):
        nxt = None
        for i in range(1, 9):
            d = (back + i) % 8
            cand = (cur[0] + _DIRS[d][0], cur[1] + _DIRS[d][1])
            if padded[cand[1], cand[0]]:
                prev = (cur[0] + _DIRS[(d - 1) % 8][0], cur[1] + _DIRS[(d - 1) % 8][1])
                nxt = cand
                back = _DIR_INDEX[(prev[0] - cand[0], prev[1] - cand[1])]
                break
        if nxt is None:  # isolated pixel
            break
        if second is None:
            second = nxt
        elif cur == start and nxt == second:
            break
        boundary.append(nxt)
        cur = nxt
    if len(boundary) > 1 and boundary[-1] == start:
        boundary.pop()
    return [(x - 1, y - 1) for x, y in boundary]


def find_contours(mask: BitMask, min_area: int = 50) -> list[Contour]:
    """One external contour per 8-connected component with at least ``min_area`` pixels."""
    mask = np.asarray(mask, dtype=bool)
    labels, n = ndimage.label(mask, structure=_EIGHT)
    contours = []
    for lab, sl in enumerate(ndimage.find_objects(labels), start=1):
        if sl is None:
            continue
        region = labels[sl] == lab
        area = int(region.sum())
        if area < min_area:
            continue
        ox, oy = sl[1].start, sl[0].start
        boundary = tuple((x + ox, y + oy) for x, y in _trace_boundary(region))
        contours.append(Contour(boundary=boundary, area_px=area, region_id=len(contours), origin=(ox, oy), region=region))
    return contours


def _region_of(mask: BitMask, contour: Contour) -> tuple[np.ndarray, tuple[int, int]]:
    if contour.region is not None:
        return contour.region, contour.origin
    labels, _ = ndimage.label(np.asarray(mask, dtype=bool), structure=_EIGHT)
    x0, y0 = contour.boundary[0]
    lab = labels[y0, x0]
    if lab == 0:
        raise ValueError("contour does not lie on the mask")
    sl = ndimage.find_objects(labels == lab)[0]
    return labels[sl] == lab, (sl[1].start, sl[0].start)


# -- point allocation ------------------------------------------------------------


def allocate_points(contours: Sequence[Contour], cfg: SpotConfig = SpotConfig()) -> list[int]:
    """Area-proportional share of the colour's point budget, at least 1 and at most the cap."""
    total = sum(c.area_px for c in contours)
    if not contours:
        return []
    if total <= 0:
        raise ValueError("total contour area must be positive")
    out = []
    for c in contours:
        share = math.floor(cfg.point_budget_per_color * c.area_px / total + 0.5)
        out.append(min(max(share, 1), cfg.max_points_per_region))
    return out


# -- k-means ---------------------------------------------------------------------


@dataclass
class KMeansResult:
    centroids: np.ndarray
    labels: np.ndarray
    inertia_history: list[float]
    n_iter: int


def _sq_dists(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    px, py = points[:, 0], points[:, 1]
    out = np.empty((len(points), len(centroids)))
    for j, (cx, cy) in enumerate(centroids):
        out[:, j] = (px - cx) ** 2 + (py - cy) ** 2
    return out


def _init_plus_plus(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(points)
    chosen = [int(rng.integers(n))]
    d2 = ((points - points[chosen[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            remaining = np.setdiff1d(np.arange(n), chosen)
            idx = int(remaining[rng.integers(len(remaining))])
        chosen.append(idx)
        d2 = np.minimum(d2, ((points - points[idx]) ** 2).sum(axis=1))
    return points[chosen].astype(np.float64)


def kmeans_fit(points, k: int, seed: int = 0, max_iter: int = 100, tol: float = 1e-4) -> KMeansResult:
    """Lloyd iterations from a seeded k-means++ start.

    Empty clusters are reseeded at the point farthest from its assigned centroid.
    Stops once no centroid moves by ``tol`` or more, or after ``max_iter`` rounds.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > len(pts):
        raise ValueError(f"k={k} exceeds the number of points ({len(pts)})")
    rng = np.random.default_rng(seed)
    centroids = _init_plus_plus(pts, k, rng)
    history: list[float] = []
    labels = np.zeros(len(pts), dtype=np.int64)
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        d2 = _sq_dists(pts, centroids)
        labels = d2.argmin(axis=1)
        best = d2[np.arange(len(pts)), labels]
        history.append(float(best.sum()))
        counts = np.bincount(labels, minlength=k)
        new = np.column_stack(
            [np.bincount(labels, weights=pts[:, 0], minlength=k), np.bincount(labels, weights=pts[:, 1], minlength=k)]
        )
        nonempty = counts > 0
        new[nonempty] /= counts[nonempty, None]
        if not nonempty.all():
            order = np.argsort(-best, kind="stable")
            taken = 0
            for j in np.flatnonzero(~nonempty):
                new[j] = pts[order[taken]]
                taken += 1
        shift = np.sqrt(((new - centroids) ** 2).sum(axis=1)).max()
        centroids = new
        if shift < tol:
            break
    d2 = _sq_dists(pts, centroids)
    labels = d2.argmin(axis=1)
    history.append(float(d2[np.arange(len(pts)), labels].sum()))
    return KMeansResult(centroids=centroids, labels=labels, inertia_history=history, n_iter=n_iter)


def kmeans(points, k: int, seed: int = 0, max_iter: int = 100, tol: float = 1e-4) -> np.ndarray:
    return kmeans_fit(points, k, seed=seed, max_iter=max_iter, tol=tol).centroids


# -- representative points -------------------------------------------------------


def _nearest_in_region(x: int, y: int, xs: np.ndarray, ys: np.ndarray) -> tuple[int, int]:
    d2 = (xs - x) ** 2 + (ys - y) ** 2
    # lexsort: last key is primary -> distance, then y, then x
    i = np.lexsort((xs, ys, d2))[0]
    return int(xs[i]), int(ys[i])


def representative_points(
    mask: BitMask,
    contour: Contour,
    k: int,
    cfg: SpotConfig = SpotConfig(),
    seed: Optional[int] = None,
) -> list[tuple[int, int]]:
    """Up to ``k`` distinct pixels, all inside the contour's region."""
    if k < 1:
        raise ValueError("k must be >= 1")
    region, (ox, oy) = _region_of(mask, contour)
    candidates = region
    if cfg.erosion_radius > 0:
        size = 2 * cfg.erosion_radius + 1
        eroded = ndimage.binary_erosion(region, structure=np.ones((size, size), dtype=bool), border_value=0)
        if eroded.any():
            candidates = eroded
    cys, cxs = np.nonzero(candidates)
    cxs = cxs + ox
    cys = cys + oy
    if len(cxs) <= k:
        return [(int(x), int(y)) for x, y in zip(cxs, cys)]

    pts = np.column_stack([cxs, cys]).astype(np.float64)
    km = cfg.kmeans
    rng_seed = km.seed if seed is None else seed
    if len(pts) > km.max_samples:
        pick = np.random.default_rng(rng_seed).choice(len(pts), size=km.max_samples, replace=False)
        pts = pts[np.sort(pick)]
    centroids = kmeans(pts, k, seed=rng_seed, max_iter=km.max_iter, tol=km.tol)

    rys, rxs = np.nonzero(region)
    rxs = rxs + ox
    rys = rys + oy
    h, w = region.shape
    out: list[tuple[int, int]] = []
    seen = set()
    for cx, cy in centroids:
        x, y = math.floor(cx + 0.5), math.floor(cy + 0.5)
        lx, ly = x - ox, y - oy
        if not (0 <= lx < w and 0 <= ly < h and region[ly, lx]):
            x, y = _nearest_in_region(x, y, rxs, rys)
        if (x, y) not in seen:
            seen.add((x, y))
            out.append((x, y))
    return out


# -- orchestration ---------------------------------------------------------------


@dataclass
class SpotRegion:
    region_id: int
    area_px: int
    contour: Optional[Contour]
    pixel_points: list[tuple[int, int]]
    geo_points: list[tuple[float, float]]


@dataclass
class SpotResult:
    image: str
    width: int
    height: int
    extent: Extent
    colors: dict[str, list[SpotRegion]]

    def to_dict(self) -> dict:
        return {
            "image": self.image,
            "width": self.width,
            "height": self.height,
            "extent": list(self.extent),
            "colors": {
                group: [
                    {
                        "region_id": r.region_id,
                        "area_px": r.area_px,
                        "pixel_points": [[int(x), int(y)] for x, y in r.pixel_points],
                        "geo_points": [[round(lat, 4), round(lon, 4)] for lat, lon in r.geo_points],
                    }
                    for r in regions
                ]
                for group, regions in self.colors.items()
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "SpotResult":
        colors = {
            group: [
                SpotRegion(
                    region_id=int(r["region_id"]),
                    area_px=int(r["area_px"]),
                    contour=None,
                    pixel_points=[tuple(p) for p in r["pixel_points"]],
                    geo_points=[tuple(g) for g in r["geo_points"]],
                )
                for r in regions
            ]
            for group, regions in d["colors"].items()
        }
        return cls(
            image=d["image"],
            width=int(d["width"]),
            height=int(d["height"]),
            extent=tuple(d.get("extent") or FULL_GLOBE),
            colors=colors,
        )


def run_spot(
    img: RasterImage,
    colors: Iterable[str],
    cfg: SpotConfig = SpotConfig(),
    extent: Extent = FULL_GLOBE,
    image_ref: str = "",
) -> SpotResult:
    out: dict[str, list[SpotRegion]] = {}
    for color in colors:
        mask = color_mask(img, color, cfg)
        contours = find_contours(mask, cfg.min_area)
        counts = allocate_points(contours, cfg)
        regions = []
        for contour, k in zip(contours, counts):
            seed = int(np.random.SeedSequence([cfg.kmeans.seed, GROUPS.index(color), contour.region_id]).generate_state(1)[0])
            pts = representative_points(mask, contour, k, cfg, seed=seed)
            lats, lons = pixels_to_geo([p[0] for p in pts], [p[1] for p in pts], img.width, img.height, extent)
            regions.append(
                SpotRegion(
                    region_id=contour.region_id,
                    area_px=contour.area_px,
                    contour=contour,
                    pixel_points=pts,
                    geo_points=[(float(a), float(b)) for a, b in zip(lats, lons)],
                )
            )
        out[color] = regions
    return SpotResult(image=image_ref, width=img.width, height=img.height, extent=tuple(extent), colors=out)


def annotate(img: RasterImage, result: SpotResult, radius: int = 3, rgb=(128, 0, 128)) -> RasterImage:
    """Copy of ``img`` with a filled disc at every representative point, clipped to the frame."""
    px = img.pixels.copy()
    h, w = img.height, img.width
    offs = [(dx, dy) for dy in range(-radius, radius + 1) for dx in range(-radius, radius + 1) if dx * dx + dy * dy <= radius * radius]
    for regions in result.colors.values():
        for region in regions:
            for x, y in region.pixel_points:
                for dx, dy in offs:
                    xx, yy = x + dx, y + dy
                    if 0 <= xx < w and 0 <= yy < h:
                        px[yy, xx] = rgb
    return RasterImage(px)
