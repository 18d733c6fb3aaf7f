"""Land/ocean boundary polygons and point -> place-name lookup."""

from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Optional, Sequence, TextIO

import numpy as np

Ring = tuple[tuple[float, float], ...]  # (lat, lon) vertices, closed
Polygon = tuple[Ring, ...]  # outer ring first, then holes


class BoundaryError(ValueError):
    pass


@dataclass(frozen=True)
class Feature:
    name: str
    admin_parent: Optional[str]
    polygons: tuple[Polygon, ...]

    def bboxes(self) -> list[tuple[float, float, float, float]]:
        """(lat_min, lat_max, lon_min, lon_max) of each polygon's outer ring."""
        out = []
        for poly in self.polygons:
            pts = np.asarray(poly[0])
            out.append((pts[:, 0].min(), pts[:, 0].max(), pts[:, 1].min(), pts[:, 1].max()))
        return out


@dataclass(frozen=True)
class BoundarySet:
    kind: str  # "land" | "ocean"
    features: tuple[Feature, ...]

    def names(self) -> list[str]:
        return [f.name for f in self.features]


@dataclass(frozen=True)
class LocationRecord:
    name: str
    kind: str  # land | ocean | unknown
    admin_parent: Optional[str]
    matched_by: str  # containment | nearest | none

    def to_dict(self) -> dict:
        return {"name": self.name, "kind": self.kind, "admin_parent": self.admin_parent, "matched_by": self.matched_by}

    @classmethod
    def from_dict(cls, d: dict) -> "LocationRecord":
        return cls(d["name"], d["kind"], d.get("admin_parent"), d["matched_by"])


UNKNOWN = LocationRecord(name="", kind="unknown", admin_parent=None, matched_by="none")


# -- loading -------------------------------------------------------------------


def _normalize_lon(lon: float) -> float:
    if -180.0 <= lon <= 180.0:
        return lon
    return (lon + 180.0) % 360.0 - 180.0


def _unwrap(lons: np.ndarray) -> np.ndarray:
    """Make consecutive longitudes continuous across the antimeridian.

    Steps between two vertices that both sit on +-180 are left alone: those
    are seams along a pole or the map edge, not crossings.
    """
    out = lons.astype(np.float64).copy()
    for k in range(1, len(lons)):
        raw = lons[k] - lons[k - 1]
        if abs(lons[k]) == 180.0 and abs(lons[k - 1]) == 180.0:
            step = raw
        else:
            step = (raw + 180.0) % 360.0 - 180.0
            if step == -180.0 and raw > 0:
                step = 180.0
        out[k] = out[k - 1] + step
    return out


def _clip_halfplane(pts: list[tuple[float, float]], bound: float, keep_above: bool) -> list[tuple[float, float]]:
    """Sutherland-Hodgman against lon >= bound (keep_above) or lon <= bound."""
    if not pts:
        return []
    inside = (lambda p: p[1] >= bound) if keep_above else (lambda p: p[1] <= bound)
    out: list[tuple[float, float]] = []
    n = len(pts)
    for k in range(n):
        cur, prev = pts[k], pts[k - 1]
        if inside(cur):
            if not inside(prev):
                out.append(_cross(prev, cur, bound))
            out.append(cur)
        elif inside(prev):
            out.append(_cross(prev, cur, bound))
    return out


def _cross(a, b, lon):
    t = (lon - a[1]) / (b[1] - a[1])
    return (a[0] + t * (b[0] - a[0]), lon)


def _ring_area(pts: Sequence[tuple[float, float]]) -> float:
    a = 0.0
    for k in range(len(pts)):
        y0, x0 = pts[k - 1]
        y1, x1 = pts[k]
        a += x0 * y1 - x1 * y0
    return a / 2.0


def _split_polygon(outer: np.ndarray, holes: list[np.ndarray]) -> list[Polygon]:
    """Split a polygon whose rings wander past +-180 into lon-normalised pieces."""
    o_lons = _unwrap(outer[:, 1])
    lo, hi = o_lons.min(), o_lons.max()
    shifted_holes = []
    for h in holes:
        h_lons = _unwrap(h[:, 1])
        # bring the hole next to the outer ring it belongs to
        shift = 360.0 * round(((lo + hi) / 2 - h_lons.mean()) / 360.0)
        shifted_holes.append(np.column_stack([h[:, 0], h_lons + shift]))
    outer_u = np.column_stack([outer[:, 0], o_lons])
    if lo >= -180.0 and hi <= 180.0:
        return [_as_polygon(outer_u, shifted_holes)]

    pieces = []
    k_min = math.floor((lo + 180.0) / 360.0)
    k_max = math.ceil((hi - 180.0) / 360.0)
    for k in range(k_min, k_max + 1):
        west, east = -180.0 + 360.0 * k, 180.0 + 360.0 * k
        clipped_outer = _clip_to_band(outer_u, west, east, -360.0 * k)
        if clipped_outer is None:
            continue
        clipped_holes = [c for c in (_clip_to_band(h, west, east, -360.0 * k) for h in shifted_holes) if c is not None]
        pieces.append(tuple([clipped_outer, *clipped_holes]))
    return pieces


def _clip_to_band(ring: np.ndarray, west: float, east: float, shift: float) -> Optional[Ring]:
    pts = [(float(a), float(b)) for a, b in ring[:-1]]
    pts = _clip_halfplane(pts, west, keep_above=True)
    pts = _clip_halfplane(pts, east, keep_above=False)
    if len(pts) < 3 or abs(_ring_area(pts)) < 1e-12:
        return None
    pts = [(lat, lon + shift) for lat, lon in pts]
    pts.append(pts[0])
    return tuple(pts)


def _as_polygon(outer: np.ndarray, holes: list[np.ndarray]) -> Polygon:
    rings = [outer, *holes]
    return tuple(tuple((float(a), float(b)) for a, b in r) for r in rings)


def _read_ring(coords, feature_index: int) -> np.ndarray:
    try:
        pts = np.array([[float(c[1]), float(c[0])] for c in coords], dtype=np.float64)
    except (TypeError, IndexError, ValueError):
        raise BoundaryError(f"feature {feature_index}: malformed ring coordinates") from None
    if len(pts) < 4:
        raise BoundaryError(f"feature {feature_index}: ring has fewer than 4 vertices")
    if not np.array_equal(pts[0], pts[-1]):
        raise BoundaryError(f"feature {feature_index}: unclosed ring")
    if not np.all(np.isfinite(pts)):
        raise BoundaryError(f"feature {feature_index}: non-finite coordinate")
    pts[:, 1] = [_normalize_lon(v) for v in pts[:, 1]]
    return pts


def load_boundaries(
    stream: str | TextIO,
    kind: str,
    name_key: str = "name",
    parent_key: str = "parent",
) -> BoundarySet:
    """Read a GeoJSON FeatureCollection of (Multi)Polygons into a BoundarySet."""
    if kind not in ("land", "ocean"):
        raise ValueError(f"kind must be 'land' or 'ocean', got {kind!r}")
    text = stream if isinstance(stream, str) else stream.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise BoundaryError(f"invalid GeoJSON: {exc}") from None
    if not isinstance(doc, dict) or doc.get("type") != "FeatureCollection":
        raise BoundaryError("expected a GeoJSON FeatureCollection")

    features = []
    for i, feat in enumerate(doc.get("features") or []):
        props = feat.get("properties") or {}
        name = props.get(name_key)
        if not isinstance(name, str) or not name.strip():
            raise BoundaryError(f"feature {i}: missing {name_key!r} property")
        parent = props.get(parent_key)
        geom = feat.get("geometry") or {}
        gtype = geom.get("type")
        if gtype == "Polygon":
            raw_polys = [geom.get("coordinates")]
        elif gtype == "MultiPolygon":
            raw_polys = geom.get("coordinates")
        else:
            raise BoundaryError(f"feature {i}: unsupported geometry type {gtype!r}")
        if not raw_polys:
            raise BoundaryError(f"feature {i}: empty geometry")
        polygons: list[Polygon] = []
        for raw in raw_polys:
            if not raw:
                raise BoundaryError(f"feature {i}: polygon without rings")
            rings = [_read_ring(r, i) for r in raw]
            polygons.extend(_split_polygon(rings[0], rings[1:]))
        features.append(Feature(name=name.strip(), admin_parent=parent if isinstance(parent, str) else None, polygons=tuple(polygons)))
    return BoundarySet(kind=kind, features=tuple(features))


def load_boundaries_file(path, kind: str, name_key: str = "name", parent_key: str = "parent") -> BoundarySet:
    with open(path, encoding="utf-8") as fh:
        return load_boundaries(fh, kind, name_key, parent_key)


def bundled_boundaries(kind: str) -> BoundarySet:
    """The small simplified world fixture shipped with the package."""
    fname = {"land": "land.geojson", "ocean": "ocean.geojson"}[kind]
    text = resources.files("gustvqa").joinpath(f"data/{fname}").read_text(encoding="utf-8")
    return load_boundaries(text, kind)


def bundled_path(kind: str):
    fname = {"land": "land.geojson", "ocean": "ocean.geojson"}[kind]
    return resources.files("gustvqa").joinpath(f"data/{fname}")


# -- containment ---------------------------------------------------------------

_EPS = 1e-9


def _on_ring_boundary(lat: float, lon: float, ring: np.ndarray) -> bool:
    y0, x0 = ring[:-1, 0], ring[:-1, 1]
    y1, x1 = ring[1:, 0], ring[1:, 1]
    cross = (x1 - x0) * (lat - y0) - (y1 - y0) * (lon - x0)
    seg_len = np.hypot(x1 - x0, y1 - y0)
    near_line = np.abs(cross) <= _EPS * np.maximum(seg_len, 1.0)
    within = (
        (lon >= np.minimum(x0, x1) - _EPS)
        & (lon <= np.maximum(x0, x1) + _EPS)
        & (lat >= np.minimum(y0, y1) - _EPS)
        & (lat <= np.maximum(y0, y1) + _EPS)
    )
    return bool(np.any(near_line & within))


def _crossings_odd(lat: float, lon: float, ring: np.ndarray) -> bool:
    y0, x0 = ring[:-1, 0], ring[:-1, 1]
    y1, x1 = ring[1:, 0], ring[1:, 1]
    straddle = (y0 > lat) != (y1 > lat)
    with np.errstate(divide="ignore", invalid="ignore"):
        x_at = x0 + (lat - y0) * (x1 - x0) / (y1 - y0)
    hits = straddle & (lon < x_at)
    return bool(np.count_nonzero(hits) % 2)


def _ring_contains(p, ring: np.ndarray, inclusive: bool) -> bool:
    lat, lon = p
    if _on_ring_boundary(lat, lon, ring):
        return inclusive
    return _crossings_odd(lat, lon, ring)


def point_in_polygon(p, feature: Feature) -> bool:
    """Even-odd test over the feature's polygons; boundary points count as inside."""
    lat, lon = float(p[0]), _normalize_lon(float(p[1]))
    q = (lat, lon)
    for poly in feature.polygons:
        if not _ring_contains(q, np.asarray(poly[0]), inclusive=True):
            continue
        if any(_ring_contains(q, np.asarray(h), inclusive=False) for h in poly[1:]):
            continue
        return True
    return False


# -- spatial index ---------------------------------------------------------------


@dataclass
class SpatialIndex:
    boundaries: BoundarySet
    cell_deg: float
    cells: dict[tuple[int, int], tuple[int, ...]] = field(default_factory=dict)
    vertices: list[np.ndarray] = field(default_factory=list, repr=False)

    @property
    def ncols(self) -> int:
        return max(1, math.ceil(360.0 / self.cell_deg))

    @property
    def nrows(self) -> int:
        return max(1, math.ceil(180.0 / self.cell_deg))

    def cell_of(self, lat: float, lon: float) -> tuple[int, int]:
        row = min(max(math.floor((lat + 90.0) / self.cell_deg), 0), self.nrows - 1)
        col = min(max(math.floor((lon + 180.0) / self.cell_deg), 0), self.ncols - 1)
        return row, col

    def candidates(self, lat: float, lon: float) -> tuple[int, ...]:
        return self.cells.get(self.cell_of(lat, lon), ())

    def candidates_in_window(self, lat: float, lon: float, radius: float) -> list[int]:
        r0, c0 = self.cell_of(lat - radius, lon - radius)
        r1, c1 = self.cell_of(lat + radius, lon + radius)
        found: set[int] = set()
        for r in range(r0, r1 + 1):
            for c in range(c0, c1 + 1):
                found.update(self.cells.get((r, c), ()))
        return sorted(found)


def build_index(boundaries: BoundarySet, cell_deg: float = 5.0) -> SpatialIndex:
    if not cell_deg > 0:
        raise ValueError("cell size must be positive")
    index = SpatialIndex(boundaries=boundaries, cell_deg=cell_deg)
    buckets: dict[tuple[int, int], set[int]] = defaultdict(set)
    for fid, feature in enumerate(boundaries.features):
        for lat0, lat1, lon0, lon1 in feature.bboxes():
            r0, c0 = index.cell_of(lat0, lon0)
            r1, c1 = index.cell_of(lat1, lon1)
            for r in range(r0, r1 + 1):
                for c in range(c0, c1 + 1):
                    buckets[(r, c)].add(fid)
        index.vertices.append(np.concatenate([np.asarray(ring) for poly in feature.polygons for ring in poly]))
    index.cells = {k: tuple(sorted(v)) for k, v in buckets.items()}
    return index


def _record(feature: Feature, kind: str, matched_by: str) -> LocationRecord:
    return LocationRecord(name=feature.name, kind=kind, admin_parent=feature.admin_parent, matched_by=matched_by)


def _first_containing(index: Optional[SpatialIndex], q) -> Optional[Feature]:
    if index is None:
        return None
    features = index.boundaries.features
    for fid in index.candidates(*q):
        if point_in_polygon(q, features[fid]):
            return features[fid]
    return None


def _nearest_vertex(index: Optional[SpatialIndex], q, tol: float):
    """(distance, fid) of the closest vertex within tol, or None."""
    if index is None:
        return None
    best = None
    for fid in index.candidates_in_window(q[0], q[1], tol):
        v = index.vertices[fid]
        d = float(np.min(np.hypot(v[:, 0] - q[0], v[:, 1] - q[1])))
        if d <= tol and (best is None or d < best[0]):
            best = (d, fid)
    return best


def locate(land: Optional[SpatialIndex], ocean: Optional[SpatialIndex], p, tol: float = 1.0) -> LocationRecord:
    """Name the place at ``p = (lat, lon)``: land containment, then ocean, then nearest vertex."""
    if tol < 0:
        raise ValueError("tol must be >= 0")
    q = (float(p[0]), _normalize_lon(float(p[1])))
    for index, kind in ((land, "land"), (ocean, "ocean")):
        feature = _first_containing(index, q)
        if feature is not None:
            return _record(feature, kind, "containment")
    options = []
    for rank, (index, kind) in enumerate(((land, "land"), (ocean, "ocean"))):
        hit = _nearest_vertex(index, q, tol)
        if hit is not None:
            options.append((hit[0], rank, hit[1], index, kind))
    if options:
        _, _, fid, index, kind = min(options, key=lambda o: o[:3])
        return _record(index.boundaries.features[fid], kind, "nearest")
    return UNKNOWN


def locate_scan(land: Optional[BoundarySet], ocean: Optional[BoundarySet], p, tol: float = 1.0) -> LocationRecord:
    """Exhaustive reference implementation of :func:`locate` with no index."""
    q = (float(p[0]), _normalize_lon(float(p[1])))
    sets = [(land, "land"), (ocean, "ocean")]
    for bset, kind in sets:
        if bset is None:
            continue
        for feature in bset.features:
            if point_in_polygon(q, feature):
                return _record(feature, kind, "containment")
    best = None
    for rank, (bset, kind) in enumerate(sets):
        if bset is None:
            continue
        for fid, feature in enumerate(bset.features):
            for poly in feature.polygons:
                for ring in poly:
                    for lat, lon in ring:
                        d = float(np.hypot(lat - q[0], lon - q[1]))
                        if d <= tol and (best is None or (d, rank, fid) < best[:3]):
                            best = (d, rank, fid, feature, kind)
    if best is None:
        return UNKNOWN
    return _record(best[3], best[4], "nearest")
