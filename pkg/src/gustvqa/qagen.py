"""Instruction-tuning question/answer generation from named SPOT points."""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Mapping, Optional, Sequence, TextIO

import numpy as np

from .geoindex import LocationRecord, SpatialIndex, locate
from .spot import SpotResult

log = logging.getLogger(__name__)

QTYPES = ("verification", "enumeration", "geo_indexing", "description")
SPLITS = ("train", "val", "test")

VERIFICATION_Q = (
    "Can you verify whether it is true or false that the location specified as {name} "
    "is currently experiencing strong gales, storm or hurricane?"
)
ENUMERATION_Q = {
    ("red", 0): "Could you identify the {Kind} regions currently undergoing strong gales, storm or hurricane?",
    ("red", 1): "Which {kind} regions are currently experiencing strong gales, storm or hurricane?",
    ("yellow", 0): "Could you identify the {Kind} regions currently undergoing strong breeze or gale?",
    ("yellow", 1): "Which {kind} regions are currently experiencing strong breeze or gale?",
}
GEOINDEX_Q = "What is the latitude and longitude of the location referred to as {name}?"
DESCRIPTION_Q = "Can you describe the image in detail?"
DESCRIPTION_A = (
    "Globally, regions are battling intense weather phenomena, including powerful gales, storms, "
    "and hurricanes, with wind gusts surpassing 20.7 m/s. The fury of these winds is felt over vast "
    "lands and oceanic stretches alike. Notably, areas such as {red_ocean}. Closer to human habitation, "
    "land regions in {red_land} reel under the power of these gales, showing nature’s unbridled force "
    "across both developed and developing landscapes. Moreover, a vast array of regions encounters strong "
    "breezes and winds gusting between 10.8 to 20.7 m/s, impacting both land and sea. This includes "
    "{yellow_ocean}. On land, {yellow_land}, each face their own challenges with these forceful winds "
    "that spare few corners of the Earth."
)
EMPTY_LIST = "None"
EMPTY_SLOT = "no notable regions"


@dataclass(frozen=True)
class GenConfig:
    counts: Mapping[str, int] = field(
        default_factory=lambda: {"verification": 10, "enumeration": 8, "geo_indexing": 10, "description": 1}
    )
    verification_ratio: tuple[int, int] = (5, 5)  # true : false
    split_ratio: tuple[int, int, int] = (7, 1, 2)
    seed: int = 0

    def __post_init__(self):
        for q in QTYPES:
            if self.counts.get(q, 0) < 0:
                raise ValueError(f"count for {q} must be >= 0")
        if any(p <= 0 for p in self.verification_ratio) or any(p <= 0 for p in self.split_ratio):
            raise ValueError("ratio parts must be positive")

    @property
    def per_image(self) -> int:
        return sum(self.counts.get(q, 0) for q in QTYPES)

    def to_dict(self) -> dict:
        return {
            "counts": dict(self.counts),
            "verification_ratio": list(self.verification_ratio),
            "split_ratio": list(self.split_ratio),
            "seed": self.seed,
        }


@dataclass
class QARecord:
    id: str
    image: str
    split: str
    qtype: str
    question: str
    answer: str
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "QARecord":
        return cls(
            id=d["id"],
            image=d["image"],
            split=d["split"],
            qtype=d["qtype"],
            question=d["question"],
            answer=d["answer"],
            meta=d.get("meta") or {},
        )


@dataclass(frozen=True)
class NamedPoint:
    geo_point: tuple[float, float]
    pixel_point: tuple[int, int]
    location: LocationRecord


@dataclass
class NamedPoints:
    image: str
    width: int
    height: int
    extent: tuple[float, float, float, float]
    colors: dict[str, list[NamedPoint]]
    dropped_unknown: int = 0

    def name_set(self, color: str, kind: Optional[str] = None) -> list[tuple[str, Optional[str]]]:
        """Sorted distinct (name, parent) pairs for a colour, optionally one kind."""
        pairs = {
            (p.location.name, p.location.admin_parent)
            for p in self.colors.get(color, [])
            if kind is None or p.location.kind == kind
        }
        return sorted(pairs, key=lambda t: (t[0], t[1] or ""))

    def names(self, color: str) -> set[str]:
        return {p.location.name for p in self.colors.get(color, [])}

    def to_dict(self) -> dict:
        return {
            "image": self.image,
            "width": self.width,
            "height": self.height,
            "extent": list(self.extent),
            "dropped_unknown": self.dropped_unknown,
            "colors": {
                c: [
                    {
                        "geo_point": [round(p.geo_point[0], 4), round(p.geo_point[1], 4)],
                        "pixel_point": list(p.pixel_point),
                        "location": p.location.to_dict(),
                    }
                    for p in pts
                ]
                for c, pts in self.colors.items()
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, ensure_ascii=False) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "NamedPoints":
        colors = {
            c: [
                NamedPoint(
                    geo_point=tuple(p["geo_point"]),
                    pixel_point=tuple(p["pixel_point"]),
                    location=LocationRecord.from_dict(p["location"]),
                )
                for p in pts
            ]
            for c, pts in d["colors"].items()
        }
        return cls(
            image=d["image"],
            width=int(d["width"]),
            height=int(d["height"]),
            extent=tuple(d["extent"]),
            colors=colors,
            dropped_unknown=int(d.get("dropped_unknown", 0)),
        )


def name_points(result: SpotResult, land: Optional[SpatialIndex], ocean: Optional[SpatialIndex], tol: float = 1.0) -> NamedPoints:
    """Attach a place name to every representative point; points nobody can name are dropped."""
    colors: dict[str, list[NamedPoint]] = {}
    dropped = 0
    for color, regions in result.colors.items():
        named = []
        for region in regions:
            for px, geo in zip(region.pixel_points, region.geo_points):
                # name the rounded coordinate that ends up in the points file
                g = (round(geo[0], 4), round(geo[1], 4))
                rec = locate(land, ocean, g, tol)
                if rec.kind == "unknown":
                    dropped += 1
                    continue
                named.append(NamedPoint(geo_point=g, pixel_point=tuple(px), location=rec))
        colors[color] = named
    return NamedPoints(
        image=result.image,
        width=result.width,
        height=result.height,
        extent=tuple(result.extent),
        colors=colors,
        dropped_unknown=dropped,
    )


# -- helpers -----------------------------------------------------------------------


def _image_rng(seed: int, image: str, stream: int) -> np.random.Generator:
    digest = int.from_bytes(hashlib.sha256(image.encode("utf-8")).digest()[:8], "big")
    return np.random.default_rng([seed, digest, stream])


def _sample(rng: np.random.Generator, items: Sequence, n: int) -> list:
    if n <= 0 or not items:
        return []
    n = min(n, len(items))
    idx = rng.choice(len(items), size=n, replace=False)
    return [items[i] for i in idx]


def _fmt_coord(v: float) -> str:
    return f"{round(v, 2) + 0.0:.2f}"


def format_coordinate(lat: float, lon: float) -> str:
    return f"({_fmt_coord(lat)}, {_fmt_coord(lon)})"


def _enumeration_item(name: str, parent: Optional[str]) -> str:
    return f"{parent}: {name}" if parent else name


@dataclass
class GenStats:
    counts: dict[str, int] = field(default_factory=lambda: {q: 0 for q in QTYPES})
    shortfalls: list[dict] = field(default_factory=list)
    dropped_unknown: dict[str, int] = field(default_factory=dict)

    def shortfall(self, image: str, qtype: str, wanted: int, got: int) -> None:
        log.warning("%s: only %d of %d %s questions could be generated", image, got, wanted, qtype)
        self.shortfalls.append({"image": image, "qtype": qtype, "wanted": wanted, "got": got})


# -- generators ------------------------------------------------------------------


def gen_verification(
    np_: NamedPoints,
    cfg: GenConfig = GenConfig(),
    gazetteer: Sequence[str] = (),
    stats: Optional[GenStats] = None,
) -> list[QARecord]:
    total = cfg.counts.get("verification", 0)
    t, f = cfg.verification_ratio
    want_true = math.floor(total * t / (t + f) + 0.5)
    red = sorted(np_.names("red"))
    others = sorted(set().union(*(np_.names(c) for c in ("yellow", "green", "white"))) - set(red))
    fallback = sorted(set(gazetteer) - set(red) - set(others))

    rng = _image_rng(cfg.seed, np_.image, 0)
    n_true = min(want_true, len(red))
    n_false = min(total - n_true, len(others) + len(fallback))
    n_true = min(total - n_false, len(red))
    positives = _sample(rng, red, n_true)
    negatives = _sample(rng, others, n_false)
    negatives += _sample(rng, fallback, n_false - len(negatives))

    items = [(name, "True") for name in positives] + [(name, "False") for name in negatives]
    order = rng.permutation(len(items))
    records = [
        QARecord(
            id=f"{np_.image}:verification:{i:02d}",
            image=np_.image,
            split="",
            qtype="verification",
            question=VERIFICATION_Q.format(name=items[j][0]),
            answer=items[j][1],
            meta={"location": items[j][0]},
        )
        for i, j in enumerate(order)
    ]
    if stats is not None and len(records) < total:
        stats.shortfall(np_.image, "verification", total, len(records))
    return records


def gen_enumeration(np_: NamedPoints, cfg: GenConfig = GenConfig(), stats: Optional[GenStats] = None) -> list[QARecord]:
    total = cfg.counts.get("enumeration", 0)
    combos = [(kind, color, variant) for kind in ("land", "ocean") for color in ("red", "yellow") for variant in (0, 1)]
    records = []
    for i, (kind, color, variant) in enumerate(combos[:total]):
        items = sorted(_enumeration_item(n, p) for n, p in np_.name_set(color, kind))
        records.append(
            QARecord(
                id=f"{np_.image}:enumeration:{i:02d}",
                image=np_.image,
                split="",
                qtype="enumeration",
                question=ENUMERATION_Q[(color, variant)].format(Kind=kind.capitalize(), kind=kind),
                answer="; ".join(items) if items else EMPTY_LIST,
                meta={"color": color, "kind": kind, "variant": variant},
            )
        )
    if stats is not None and len(records) < total:
        stats.shortfall(np_.image, "enumeration", total, len(records))
    return records


def gen_geoindex(np_: NamedPoints, cfg: GenConfig = GenConfig(), stats: Optional[GenStats] = None) -> list[QARecord]:
    total = cfg.counts.get("geo_indexing", 0)
    by_name: dict[str, list[tuple[str, NamedPoint]]] = {}
    for color in ("red", "yellow"):
        for p in np_.colors.get(color, []):
            by_name.setdefault(p.location.name, []).append((color, p))
    rng = _image_rng(cfg.seed, np_.image, 2)
    names = _sample(rng, sorted(by_name), total)
    records = []
    for i, name in enumerate(names):
        options = by_name[name]
        color, point = options[int(rng.integers(len(options)))]
        lat, lon = point.geo_point
        records.append(
            QARecord(
                id=f"{np_.image}:geo_indexing:{i:02d}",
                image=np_.image,
                split="",
                qtype="geo_indexing",
                question=GEOINDEX_Q.format(name=name),
                answer=format_coordinate(lat, lon),
                meta={"color": color, "location": name, "coordinate": [lat, lon]},
            )
        )
    if stats is not None and len(records) < total:
        stats.shortfall(np_.image, "geo_indexing", total, len(records))
    return records


def _slot(names: Iterable[tuple[str, Optional[str]]]) -> str:
    distinct = sorted({n for n, _ in names})
    return ", ".join(distinct) if distinct else EMPTY_SLOT


def description_text(np_: NamedPoints) -> str:
    return DESCRIPTION_A.format(
        red_ocean=_slot(np_.name_set("red", "ocean")),
        red_land=_slot(np_.name_set("red", "land")),
        yellow_ocean=_slot(np_.name_set("yellow", "ocean")),
        yellow_land=_slot(np_.name_set("yellow", "land")),
    )


def gen_description(np_: NamedPoints, cfg: GenConfig = GenConfig()) -> list[QARecord]:
    return [
        QARecord(
            id=f"{np_.image}:description:{i:02d}",
            image=np_.image,
            split="",
            qtype="description",
            question=DESCRIPTION_Q,
            answer=description_text(np_),
            meta={},
        )
        for i in range(cfg.counts.get("description", 0))
    ]


def generate_image(
    np_: NamedPoints,
    cfg: GenConfig = GenConfig(),
    gazetteer: Sequence[str] = (),
    stats: Optional[GenStats] = None,
) -> list[QARecord]:
    return (
        gen_verification(np_, cfg, gazetteer, stats)
        + gen_enumeration(np_, cfg, stats)
        + gen_geoindex(np_, cfg, stats)
        + gen_description(np_, cfg)
    )


def split_dataset(images: Sequence[str], ratio: Sequence[int] = (7, 1, 2), seed: int = 0) -> dict[str, str]:
    """Assign each image to train/val/test; val and test get floor shares, train the rest."""
    ids = sorted(set(images))
    n = len(ids)
    total = sum(ratio)
    n_val = n * ratio[1] // total
    n_test = n * ratio[2] // total
    n_train = n - n_val - n_test
    order = np.random.default_rng(seed).permutation(n)
    out = {}
    for rank, i in enumerate(order):
        out[ids[i]] = "train" if rank < n_train else ("val" if rank < n_train + n_val else "test")
    return out


def generate_dataset(
    named: Sequence[NamedPoints],
    cfg: GenConfig = GenConfig(),
    gazetteer: Sequence[str] = (),
) -> tuple[list[QARecord], dict]:
    """All records for a corpus of images, split-tagged, plus a stats sidecar dict."""
    stats = GenStats()
    splits = split_dataset([n.image for n in named], cfg.split_ratio, cfg.seed)
    records: list[QARecord] = []
    for np_ in sorted(named, key=lambda n: n.image):
        stats.dropped_unknown[np_.image] = np_.dropped_unknown
        for rec in generate_image(np_, cfg, gazetteer, stats):
            rec.split = splits[np_.image]
            stats.counts[rec.qtype] += 1
            records.append(rec)
    split_counts = {s: 0 for s in SPLITS}
    for rec in records:
        split_counts[rec.split] += 1
    return records, {
        "images": len(named),
        "records": len(records),
        "per_type": stats.counts,
        "per_split": split_counts,
        "shortfalls": stats.shortfalls,
        "dropped_unknown": stats.dropped_unknown,
        "seed": cfg.seed,
    }


# -- JSONL -------------------------------------------------------------------------


class JSONLError(ValueError):
    def __init__(self, message: str, line: int):
        self.line = line
        super().__init__(f"line {line}: {message}")


def dumps_jsonl(records: Iterable) -> str:
    lines = []
    for r in records:
        d = r.to_dict() if hasattr(r, "to_dict") else r
        lines.append(json.dumps(d, ensure_ascii=False, separators=(",", ":")))
    return "".join(line + "\n" for line in lines)


def write_jsonl(records: Iterable, stream: TextIO) -> None:
    stream.write(dumps_jsonl(records))


def read_jsonl(stream: str | TextIO, as_records: bool = True) -> list:
    text = stream if isinstance(stream, str) else stream.read()
    out = []
    # split on LF only: raw U+2028/U+0085 may legitimately appear inside JSON strings
    for lineno, line in enumerate(text.split("\n"), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise JSONLError(f"invalid JSON ({exc.msg})", lineno) from None
        if not isinstance(obj, dict):
            raise JSONLError("expected a JSON object", lineno)
        if as_records:
            try:
                obj = QARecord.from_dict(obj)
            except KeyError as exc:
                raise JSONLError(f"missing field {exc.args[0]!r}", lineno) from None
        out.append(obj)
    return out
