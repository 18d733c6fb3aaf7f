"""End-to-end batch run: grids -> heatmaps -> points -> named points -> dataset."""

from __future__ import annotations

import hashlib
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from .beaufort import GROUPS, BeaufortTable, load_table
from .geoindex import BoundarySet, build_index, bundled_path, load_boundaries_file
from .grid import read_wgf
from .qagen import GenConfig, NamedPoints, dumps_jsonl, generate_dataset, name_points
from .raster import write_png
from .render import RenderConfig, overlay_coastlines, render
from .spot import KMeansConfig, SpotConfig, run_spot

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Invalid or inconsistent configuration (a usage error)."""


class DataError(RuntimeError):
    """Inputs exist but cannot be processed."""


@dataclass(frozen=True)
class Paths:
    grids: Path
    output: Path
    land: Optional[Path] = None  # bundled fixture when None
    ocean: Optional[Path] = None
    palette: Optional[Path] = None
    land_name_key: str = "name"
    land_parent_key: str = "parent"
    ocean_name_key: str = "name"
    ocean_parent_key: str = "parent"


@dataclass(frozen=True)
class PipelineConfig:
    paths: Paths
    render: RenderConfig = RenderConfig()
    spot: dict = field(default_factory=dict)
    gen: dict = field(default_factory=dict)
    colors: tuple[str, ...] = GROUPS
    locate_tol: float = 1.0
    seed: int = 0
    workers: int = 1

    def spot_config(self, table: BeaufortTable) -> SpotConfig:
        return build_spot_config(self.spot, self.seed, table)

    def gen_config(self) -> GenConfig:
        return build_gen_config(self.gen, self.seed)

    def snapshot(self) -> dict:
        p = self.paths
        return {
            "paths": {
                "grids": str(p.grids),
                "output": str(p.output),
                "land": str(p.land) if p.land else None,
                "ocean": str(p.ocean) if p.ocean else None,
                "palette": str(p.palette) if p.palette else None,
                "land_name_key": p.land_name_key,
                "land_parent_key": p.land_parent_key,
                "ocean_name_key": p.ocean_name_key,
                "ocean_parent_key": p.ocean_parent_key,
            },
            "render": {
                "width": self.render.width,
                "height": self.render.height,
                "overlay_coastlines": self.render.overlay_coastlines,
                "coastline_rgb": list(self.render.coastline_rgb),
                "coastline_thickness": self.render.coastline_thickness,
            },
            "spot": self.spot_config(load_table(p.palette)).to_dict(),
            "gen": self.gen_config().to_dict(),
            "colors": list(self.colors),
            "locate_tol": self.locate_tol,
            "seed": self.seed,
            "workers": self.workers,
        }


def _check_keys(section: str, raw: dict, allowed) -> None:
    unknown = set(raw) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in {section}: {', '.join(sorted(unknown))}")


def build_spot_config(raw: dict, seed: int, table: BeaufortTable) -> SpotConfig:
    raw = dict(raw or {})
    _check_keys("spot", raw, ("match_mode", "min_area", "erosion_radius", "point_budget_per_color", "max_points_per_region", "kmeans"))
    km = dict(raw.pop("kmeans", {}) or {})
    _check_keys("spot.kmeans", km, ("max_iter", "tol", "max_samples"))
    try:
        return SpotConfig(kmeans=KMeansConfig(seed=seed, **km), table=table, **raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"spot: {exc}") from None


def build_gen_config(raw: dict, seed: int) -> GenConfig:
    raw = dict(raw or {})
    _check_keys("gen", raw, ("counts", "verification_ratio", "split_ratio"))
    kwargs: dict[str, Any] = {"seed": seed}
    if "counts" in raw:
        counts = GenConfig().counts | dict(raw["counts"])
        kwargs["counts"] = {k: int(v) for k, v in counts.items()}
    for key in ("verification_ratio", "split_ratio"):
        if key in raw:
            kwargs[key] = tuple(int(v) for v in raw[key])
    try:
        return GenConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"gen: {exc}") from None


def build_render_config(raw: dict) -> RenderConfig:
    raw = dict(raw or {})
    _check_keys("render", raw, ("width", "height", "overlay_coastlines", "coastline_rgb", "coastline_thickness"))
    if "coastline_rgb" in raw:
        raw["coastline_rgb"] = tuple(int(c) for c in raw["coastline_rgb"])
    try:
        return RenderConfig(**raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"render: {exc}") from None


def load_config(path=None, overrides: Optional[dict] = None) -> PipelineConfig:
    """Read a JSON config; ``overrides`` (from flags) win over file values.

    Relative paths in the file resolve against the file's directory.
    """
    raw: dict = {}
    base = Path.cwd()
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                raw = json.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        base = Path(path).resolve().parent
    _check_keys("config", raw, ("paths", "render", "spot", "gen", "colors", "locate_tol", "seed", "workers"))

    paths_raw = dict(raw.get("paths") or {})
    flag_paths = {k: v for k, v in (overrides or {}).items() if k in ("grids", "output") and v is not None}
    _check_keys("paths", paths_raw, Paths.__dataclass_fields__)

    def resolve(value, from_flag: bool) -> Optional[Path]:
        if value is None:
            return None
        p = Path(value)
        return p if p.is_absolute() or from_flag else (base / p)

    merged = {}
    for key in Paths.__dataclass_fields__:
        if key in flag_paths:
            merged[key] = resolve(flag_paths[key], True)
        elif key in paths_raw:
            merged[key] = resolve(paths_raw[key], False) if not key.endswith("_key") else str(paths_raw[key])
    for key in ("grids", "output"):
        if merged.get(key) is None:
            raise ConfigError(f"paths.{key} is required")
    paths = Paths(**merged)

    seed = (overrides or {}).get("seed")
    seed = int(raw.get("seed", 0) if seed is None else seed)
    workers = (overrides or {}).get("workers")
    workers = int(raw.get("workers", 1) if workers is None else workers)
    if workers < 1:
        raise ConfigError("workers must be >= 1")
    colors = tuple(raw.get("colors", GROUPS))
    bad = [c for c in colors if c not in GROUPS]
    if bad:
        raise ConfigError(f"unknown colour group(s): {', '.join(bad)}")

    cfg = PipelineConfig(
        paths=paths,
        render=build_render_config(raw.get("render")),
        spot=dict(raw.get("spot") or {}),
        gen=dict(raw.get("gen") or {}),
        colors=colors,
        locate_tol=float(raw.get("locate_tol", 1.0)),
        seed=seed,
        workers=workers,
    )
    # surface bad spot/gen sections now rather than mid-run
    cfg.spot_config(load_table(paths.palette) if paths.palette and paths.palette.exists() else load_table())
    cfg.gen_config()
    return cfg


def validate_paths(cfg: PipelineConfig) -> None:
    p = cfg.paths
    if not p.grids.is_dir():
        raise DataError(f"grids directory not found: {p.grids}")
    for label, value in (("land", p.land), ("ocean", p.ocean), ("palette", p.palette)):
        if value is not None and not value.is_file():
            raise DataError(f"{label} file not found: {value}")


# -- shared resources --------------------------------------------------------------


def load_land(path: Optional[Path], name_key="name", parent_key="parent") -> BoundarySet:
    return load_boundaries_file(path or bundled_path("land"), "land", name_key, parent_key)


def load_ocean(path: Optional[Path], name_key="name", parent_key="parent") -> BoundarySet:
    return load_boundaries_file(path or bundled_path("ocean"), "ocean", name_key, parent_key)


def gazetteer(*sets: BoundarySet) -> list[str]:
    return sorted({name for s in sets for name in s.names()})


@dataclass
class _Context:
    cfg: PipelineConfig
    table: BeaufortTable
    land: BoundarySet
    ocean: BoundarySet
    land_idx: Any = None
    ocean_idx: Any = None

    @classmethod
    def load(cls, cfg: PipelineConfig) -> "_Context":
        p = cfg.paths
        land = load_land(p.land, p.land_name_key, p.land_parent_key)
        ocean = load_ocean(p.ocean, p.ocean_name_key, p.ocean_parent_key)
        return cls(cfg, load_table(p.palette), land, ocean, build_index(land), build_index(ocean))


_WORKER_CTX: Optional[_Context] = None


def _init_worker(cfg: PipelineConfig) -> None:
    global _WORKER_CTX
    _WORKER_CTX = _Context.load(cfg)


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    tmp = path.with_name(f".{path.name}.tmp{os.getpid()}")
    try:
        with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError:
        tmp.unlink(missing_ok=True)
        raise


def image_name(grid_path: Path) -> str:
    return f"{grid_path.stem}.png"


def process_grid(grid_path: Path, ctx: _Context) -> dict:
    """Render, SPOT and name one grid. Returns the named-points dict and written files."""
    cfg = ctx.cfg
    out = cfg.paths.output
    name = image_name(grid_path)
    grid = read_wgf(grid_path)
    img = render(grid, cfg.render, ctx.table)
    if cfg.render.overlay_coastlines:
        img = overlay_coastlines(img, ctx.land, cfg.render, grid.extent)
    png = out / "images" / name
    write_png(img, png)

    result = run_spot(img, cfg.colors, cfg.spot_config(ctx.table), grid.extent, image_ref=name)
    points = out / "points" / f"{grid_path.stem}.json"
    atomic_write_text(points, result.to_json())

    named = name_points(result, ctx.land_idx, ctx.ocean_idx, cfg.locate_tol)
    named_path = out / "named" / f"{grid_path.stem}.json"
    text = named.to_json()
    atomic_write_text(named_path, text)
    return {"named": json.loads(text), "files": [png, points, named_path]}


def _process_in_worker(grid_path: Path) -> dict:
    return process_grid(grid_path, _WORKER_CTX)


def _rel(path: Path, root: Path) -> str:
    return path.relative_to(root).as_posix()


def run_pipeline(cfg: PipelineConfig) -> dict:
    """Run every grid and write the dataset. Returns the manifest dict.

    A grid that fails is logged and listed under ``failures``; the rest continue.
    """
    validate_paths(cfg)
    out = cfg.paths.output
    for sub in ("images", "points", "named"):
        (out / sub).mkdir(parents=True, exist_ok=True)

    grids = sorted(p for p in cfg.paths.grids.iterdir() if p.is_file() and p.suffix == ".wgf")
    log.info("pipeline: %d grid(s), seed %d, %d worker(s)", len(grids), cfg.seed, cfg.workers)
    ctx = _Context.load(cfg)

    results: dict[Path, dict] = {}
    failures: list[dict] = []

    def record_failure(g: Path, exc: BaseException) -> None:
        log.error("grid %s failed: %s", g.name, exc)
        failures.append({"grid": g.name, "error": f"{type(exc).__name__}: {exc}"})

    if cfg.workers > 1 and len(grids) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers, initializer=_init_worker, initargs=(cfg,)) as pool:
            futures = {g: pool.submit(_process_in_worker, g) for g in grids}
            for g, fut in futures.items():
                try:
                    results[g] = fut.result()
                except Exception as exc:  # isolate per-grid failures
                    record_failure(g, exc)
    else:
        for g in grids:
            try:
                results[g] = process_grid(g, ctx)
            except Exception as exc:
                record_failure(g, exc)

    named = [NamedPoints.from_dict(results[g]["named"]) for g in grids if g in results]
    records, stats = generate_dataset(named, cfg.gen_config(), gazetteer(ctx.land, ctx.ocean))
    dataset = out / "dataset.jsonl"
    atomic_write_text(dataset, dumps_jsonl(records))
    stats_path = out / "stats.json"
    atomic_write_text(stats_path, json.dumps(stats, indent=1, sort_keys=True) + "\n")

    files = [f for g in grids if g in results for f in results[g]["files"]] + [dataset, stats_path]
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "seed": cfg.seed,
        "config": cfg.snapshot(),
        "images": [image_name(g) for g in grids if g in results],
        "records": len(records),
        "artifacts": [{"path": _rel(f, out), "sha256": sha256_file(f), "bytes": f.stat().st_size} for f in files],
        "failures": failures,
    }
    atomic_write_text(out / "manifest.json", json.dumps(manifest, indent=1) + "\n")
    log.info("pipeline: %d image(s) ok, %d failed, %d record(s)", len(results), len(failures), len(records))
    return manifest


def exit_status(manifest: dict) -> int:
    """0 success, 2 when every grid failed, 3 on partial failure."""
    if not manifest["failures"]:
        return 0
    return 2 if not manifest["images"] else 3
