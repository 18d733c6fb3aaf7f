"""Beaufort classification and the 13-colour palette."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from typing import Sequence

import numpy as np

GROUPS = ("white", "green", "yellow", "red")
_GROUP_LEVELS = {"white": (0, 1, 2), "green": (3, 4, 5), "yellow": (6, 7, 8), "red": (9, 10, 11, 12)}


@dataclass(frozen=True)
class Band:
    level: int
    name: str
    rgb: tuple[int, int, int]
    lower_mps: float
    upper_mps: float  # math.inf for the top band
    group: str


@dataclass(frozen=True)
class BeaufortTable:
    bands: tuple[Band, ...]

    def __post_init__(self):
        if len(self.bands) != 13:
            raise ValueError(f"expected 13 bands, got {len(self.bands)}")
        for i, band in enumerate(self.bands):
            if band.level != i:
                raise ValueError(f"band {i} has level {band.level}")
            if band.group not in GROUPS or i not in _GROUP_LEVELS[band.group]:
                raise ValueError(f"level {i} cannot belong to group {band.group!r}")
            if any(not 0 <= c <= 255 for c in band.rgb):
                raise ValueError(f"level {i} rgb out of range")
        if self.bands[0].lower_mps != 0:
            raise ValueError("lowest band must start at 0 m/s")
        for lo, hi in zip(self.bands, self.bands[1:]):
            if lo.upper_mps != hi.lower_mps or not hi.lower_mps > lo.lower_mps:
                raise ValueError(f"bands {lo.level} and {hi.level} are not contiguous")
        if not math.isinf(self.bands[-1].upper_mps):
            raise ValueError("top band must be open-ended")
        if len({b.rgb for b in self.bands}) != 13:
            raise ValueError("palette colours must be pairwise distinct")

    @property
    def lowers(self) -> np.ndarray:
        return np.array([b.lower_mps for b in self.bands])

    @property
    def colors(self) -> np.ndarray:
        return np.array([b.rgb for b in self.bands], dtype=np.uint8)

    def group_rgbs(self, group: str) -> list[tuple[int, int, int]]:
        if group not in GROUPS:
            raise ValueError(f"unknown colour group {group!r}")
        return [b.rgb for b in self.bands if b.group == group]

    def to_json(self) -> str:
        rows = [
            {
                "level": b.level,
                "name": b.name,
                "rgb": list(b.rgb),
                "lower_mps": b.lower_mps,
                "upper_mps": None if math.isinf(b.upper_mps) else b.upper_mps,
                "group": b.group,
            }
            for b in self.bands
        ]
        return json.dumps(rows, indent=2)


def table_from_json(text: str) -> BeaufortTable:
    rows = json.loads(text)
    bands = []
    for row in rows:
        upper = row.get("upper_mps")
        bands.append(
            Band(
                level=int(row["level"]),
                name=str(row["name"]),
                rgb=tuple(int(c) for c in row["rgb"]),
                lower_mps=float(row["lower_mps"]),
                upper_mps=math.inf if upper is None else float(upper),
                group=str(row["group"]),
            )
        )
    return BeaufortTable(tuple(sorted(bands, key=lambda b: b.level)))


def load_table(path=None) -> BeaufortTable:
    if path is None:
        text = resources.files("gustvqa").joinpath("data/palette.json").read_text(encoding="utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    return table_from_json(text)


DEFAULT_TABLE = load_table()


def beaufort_level(speed: float, table: BeaufortTable = DEFAULT_TABLE) -> int:
    if not isinstance(speed, (int, float, np.floating, np.integer)) or math.isnan(speed) or speed < 0:
        raise ValueError(f"speed must be a finite non-negative number, got {speed!r}")
    if math.isinf(speed):
        raise ValueError("speed must be finite")
    return int(np.searchsorted(table.lowers, speed, side="right") - 1)


def levels_of(values: np.ndarray, table: BeaufortTable = DEFAULT_TABLE) -> np.ndarray:
    """Vectorised level lookup; NaN and negative inputs map to level 0."""
    v = np.nan_to_num(np.asarray(values, dtype=np.float64), nan=0.0)
    return np.clip(np.searchsorted(table.lowers, v, side="right") - 1, 0, 12)


def color_group(level: int) -> str:
    if isinstance(level, bool) or not isinstance(level, (int, np.integer)) or not 0 <= level <= 12:
        raise ValueError(f"Beaufort level must be an integer in 0..12, got {level!r}")
    for group, levels in _GROUP_LEVELS.items():
        if level in levels:
            return group
    raise AssertionError("unreachable")


def group_levels(group: str) -> Sequence[int]:
    if group not in _GROUP_LEVELS:
        raise ValueError(f"unknown colour group {group!r}")
    return _GROUP_LEVELS[group]
