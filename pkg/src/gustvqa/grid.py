"""Gridded wind-gust fields: the WGF text format and a synthetic storm generator."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence, TextIO

import numpy as np

WGF_MAGIC = "#wgf v1"
HEADER_KEYS = ("nlat", "nlon", "lat_north", "lat_south", "lon_west", "lon_east", "timestamp", "units")


class WGFError(ValueError):
    """Base class for WGF parse failures. ``line`` is 1-based, or None."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


class HeaderError(WGFError):
    pass


class ShapeError(WGFError):
    pass


class NegativeSpeedError(WGFError):
    pass


class UnitError(WGFError):
    pass


@dataclass(frozen=True, eq=False)
class WindGrid:
    """Dense lat/lon grid of gust speeds in m/s. Row 0 is the northmost row."""

    values: np.ndarray
    lat_north: float = 90.0
    lat_south: float = -90.0
    lon_west: float = -180.0
    lon_east: float = 180.0
    timestamp: str = "1970-01-01T00:00:00Z"
    units: str = "m/s"

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise ValueError(f"values must be a non-empty 2-D array, got shape {values.shape}")
        if not self.lat_north > self.lat_south:
            raise ValueError("lat_north must exceed lat_south")
        if not self.lon_east > self.lon_west:
            raise ValueError("lon_east must exceed lon_west")
        if self.units != "m/s":
            raise ValueError(f"units must be 'm/s', got {self.units!r}")
        finite = values[np.isfinite(values)]
        if finite.size and finite.min() < 0:
            raise ValueError("wind speeds must be non-negative")
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def nlat(self) -> int:
        return self.values.shape[0]

    @property
    def nlon(self) -> int:
        return self.values.shape[1]

    @property
    def extent(self) -> tuple[float, float, float, float]:
        """(lat_north, lat_south, lon_west, lon_east)."""
        return (self.lat_north, self.lat_south, self.lon_west, self.lon_east)

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Latitudes of row centres and longitudes of column centres."""
        dlat = (self.lat_north - self.lat_south) / self.nlat
        dlon = (self.lon_east - self.lon_west) / self.nlon
        lats = self.lat_north - (np.arange(self.nlat) + 0.5) * dlat
        lons = self.lon_west + (np.arange(self.nlon) + 0.5) * dlon
        return lats, lons

    def __eq__(self, other):
        if not isinstance(other, WindGrid):
            return NotImplemented
        return (
            self.extent == other.extent
            and self.timestamp == other.timestamp
            and self.units == other.units
            and self.values.shape == other.values.shape
            and np.array_equal(self.values, other.values, equal_nan=True)
        )


def _format_float(x: float) -> str:
    if math.isnan(x):
        return "nan"
    return repr(float(x))


def write_wgf(grid: WindGrid) -> str:
    header = {
        "nlat": str(grid.nlat),
        "nlon": str(grid.nlon),
        "lat_north": _format_float(grid.lat_north),
        "lat_south": _format_float(grid.lat_south),
        "lon_west": _format_float(grid.lon_west),
        "lon_east": _format_float(grid.lon_east),
        "timestamp": grid.timestamp,
        "units": grid.units,
    }
    out = io.StringIO()
    out.write(WGF_MAGIC + "\n")
    for key in HEADER_KEYS:
        out.write(f"{key}={header[key]}\n")
    out.write("\n")
    for row in grid.values:
        out.write(",".join(_format_float(v) for v in row) + "\n")
    return out.getvalue()


def _parse_header_number(key: str, raw: str, lineno: int, integer: bool = False):
    try:
        value = int(raw) if integer else float(raw)
    except ValueError:
        raise HeaderError(f"{key} is not a valid number: {raw!r}", lineno) from None
    if integer and value < 1:
        raise HeaderError(f"{key} must be a positive integer", lineno)
    if not integer and not math.isfinite(value):
        raise HeaderError(f"{key} must be finite", lineno)
    return value


def parse_wgf(stream: str | TextIO) -> WindGrid:
    """Parse WGF v1 text (or a text stream) into a validated WindGrid."""
    text = stream if isinstance(stream, str) else stream.read()
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or lines[0].strip() != WGF_MAGIC:
        raise HeaderError(f"missing {WGF_MAGIC!r} magic line", 1)

    header: dict[str, tuple[str, int]] = {}
    i = 1
    while i < len(lines) and lines[i].strip() != "":
        line = lines[i]
        if "=" not in line:
            raise HeaderError(f"malformed header line {line!r}", i + 1)
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in HEADER_KEYS:
            raise HeaderError(f"unknown header key {key!r}", i + 1)
        if key in header:
            raise HeaderError(f"duplicate header key {key!r}", i + 1)
        header[key] = (value.strip(), i + 1)
        i += 1
    missing = [k for k in HEADER_KEYS if k not in header]
    if missing:
        raise HeaderError(f"missing header keys: {', '.join(missing)}", i + 1)

    nlat = _parse_header_number("nlat", *header["nlat"], integer=True)
    nlon = _parse_header_number("nlon", *header["nlon"], integer=True)
    bounds = {k: _parse_header_number(k, *header[k]) for k in ("lat_north", "lat_south", "lon_west", "lon_east")}
    units, units_line = header["units"]
    if units != "m/s":
        raise UnitError(f"units must be 'm/s', got {units!r}", units_line)
    if not bounds["lat_north"] > bounds["lat_south"]:
        raise HeaderError("lat_north must exceed lat_south", header["lat_north"][1])
    if not bounds["lon_east"] > bounds["lon_west"]:
        raise HeaderError("lon_east must exceed lon_west", header["lon_east"][1])

    body_start = i + 1  # skip the blank separator
    body = lines[body_start:]
    if len(body) != nlat:
        raise ShapeError(f"row count mismatch: header says nlat={nlat}, found {len(body)} rows", body_start + 1)
    values = np.empty((nlat, nlon), dtype=np.float64)
    for r, line in enumerate(body):
        lineno = body_start + r + 1
        tokens = line.split(",")
        if len(tokens) != nlon:
            raise ShapeError(f"column count mismatch: expected {nlon}, found {len(tokens)}", lineno)
        for c, tok in enumerate(tokens):
            tok = tok.strip()
            try:
                v = float(tok)
            except ValueError:
                raise ShapeError(f"invalid number {tok!r} in column {c + 1}", lineno) from None
            if math.isinf(v):
                raise ShapeError(f"infinite value in column {c + 1}", lineno)
            if v < 0:
                raise NegativeSpeedError(f"negative speed {tok} in column {c + 1}", lineno)
            values[r, c] = v

    return WindGrid(
        values=values,
        timestamp=header["timestamp"][0],
        units=units,
        **bounds,
    )


def read_wgf(path) -> WindGrid:
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_wgf(fh)


def save_wgf(grid: WindGrid, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(write_wgf(grid))


@dataclass(frozen=True)
class Blob:
    center_lat: float
    center_lon: float
    peak_speed: float
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("blob sigma must be positive")


@dataclass(frozen=True)
class SyntheticSpec:
    nlat: int
    nlon: int
    blobs: Sequence[Blob] = ()
    background_speed: float = 0.0
    noise: float = 0.0
    lat_north: float = 90.0
    lat_south: float = -90.0
    lon_west: float = -180.0
    lon_east: float = 180.0
    timestamp: str = "2023-01-01T00:00:00Z"

    def __post_init__(self):
        if self.nlat < 1 or self.nlon < 1:
            raise ValueError("grid dimensions must be positive")
        if self.background_speed < 0:
            raise ValueError("background_speed must be >= 0")
        if self.noise < 0:
            raise ValueError("noise must be >= 0")
        for blob in self.blobs:
            if blob.peak_speed < self.background_speed:
                raise ValueError("blob peak_speed must be >= background_speed")


def synth_grid(spec: SyntheticSpec, seed: int = 0) -> WindGrid:
    """Background plus Gaussian storm blobs, evaluated at cell centres.

    Distances are planar in degrees. ``noise`` adds seeded Gaussian jitter
    (clipped at zero); with the default of 0 the seed has no effect.
    """
    values = np.full((spec.nlat, spec.nlon), float(spec.background_speed))
    dlat = (spec.lat_north - spec.lat_south) / spec.nlat
    dlon = (spec.lon_east - spec.lon_west) / spec.nlon
    lats = spec.lat_north - (np.arange(spec.nlat) + 0.5) * dlat
    lons = spec.lon_west + (np.arange(spec.nlon) + 0.5) * dlon
    for blob in spec.blobs:
        d2 = (lats[:, None] - blob.center_lat) ** 2 + (lons[None, :] - blob.center_lon) ** 2
        values += blob.peak_speed * np.exp(-d2 / (2.0 * blob.sigma**2))
    if spec.noise > 0:
        rng = np.random.default_rng(seed)
        values = np.clip(values + rng.normal(0.0, spec.noise, values.shape), 0.0, None)
    return WindGrid(
        values=values,
        lat_north=spec.lat_north,
        lat_south=spec.lat_south,
        lon_west=spec.lon_west,
        lon_east=spec.lon_east,
        timestamp=spec.timestamp,
    )


def random_storm_spec(
    rng: np.random.Generator,
    nlat: int = 90,
    nlon: int = 180,
    n_blobs: tuple[int, int] = (1, 6),
    peak_range: tuple[float, float] = (12.0, 40.0),
    sigma_range: tuple[float, float] = (4.0, 18.0),
    background_range: tuple[float, float] = (0.0, 6.0),
) -> SyntheticSpec:
    """Draw a randomized storm field spec; used for corpus and property tests."""
    background = float(rng.uniform(*background_range))
    count = int(rng.integers(n_blobs[0], n_blobs[1] + 1))
    blobs = [
        Blob(
            center_lat=float(rng.uniform(-75, 75)),
            center_lon=float(rng.uniform(-175, 175)),
            peak_speed=float(max(background, rng.uniform(*peak_range))),
            sigma=float(rng.uniform(*sigma_range)),
        )
        for _ in range(count)
    ]
    return SyntheticSpec(nlat=nlat, nlon=nlon, blobs=blobs, background_speed=background)


def grid_stats(grid: WindGrid, table=None) -> dict:
    """Per-Beaufort-level cell counts plus a NaN bucket."""
    from .beaufort import DEFAULT_TABLE, levels_of

    table = table or DEFAULT_TABLE
    values = grid.values
    nan = np.isnan(values)
    levels = levels_of(np.where(nan, 0.0, values), table)
    counts = np.bincount(levels[~nan].ravel(), minlength=13)
    return {
        "levels": [int(c) for c in counts],
        "nan": int(nan.sum()),
        "total": int(values.size),
    }
