"""Command-line entry point: ``gustvqa <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 partial pipeline failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .beaufort import GROUPS, load_table
from .evaluate import EvalError, evaluate
from .geoindex import BoundaryError, build_index, locate
from .grid import WGFError, grid_stats, read_wgf
from .judge import JudgeClient, JudgeConfig, JudgeError
from .pipeline import (
    ConfigError,
    DataError,
    atomic_write_text,
    build_gen_config,
    build_render_config,
    build_spot_config,
    exit_status,
    gazetteer,
    load_config,
    load_land,
    load_ocean,
    run_pipeline,
)
from .qagen import JSONLError, NamedPoints, dumps_jsonl, generate_dataset, name_points, read_jsonl
from .raster import FULL_GLOBE, read_png, write_png
from .render import overlay_coastlines, render
from .spot import SpotResult, annotate, run_spot

log = logging.getLogger("gustvqa")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_PARTIAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _read_json(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _section(args, key: str) -> dict:
    """A section of the optional --config file (unused keys ignored)."""
    if not getattr(args, "config", None):
        return {}
    try:
        raw = _read_json(args.config)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {args.config}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {args.config} is not valid JSON: {exc}") from None
    return dict(raw.get(key) or {})


def _extent(text: Optional[str]):
    if not text:
        return FULL_GLOBE
    try:
        parts = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise UsageError(f"--extent must be four numbers N,S,W,E, got {text!r}") from None
    if len(parts) != 4:
        raise UsageError(f"--extent must be four numbers N,S,W,E, got {text!r}")
    return parts


def _boundaries(args):
    land = load_land(Path(args.land) if args.land else None, args.land_name_key, args.land_parent_key)
    ocean = load_ocean(Path(args.ocean) if args.ocean else None, args.ocean_name_key, args.ocean_parent_key)
    return land, ocean


# -- subcommands ---------------------------------------------------------------------


def cmd_render(args) -> int:
    raw = _section(args, "render")
    for key in ("width", "height"):
        if getattr(args, key) is not None:
            raw[key] = getattr(args, key)
    if args.no_coastlines:
        raw["overlay_coastlines"] = False
    cfg = build_render_config(raw)
    grid = read_wgf(args.grid)
    img = render(grid, cfg, load_table(args.palette))
    if cfg.overlay_coastlines:
        land = load_land(Path(args.land) if args.land else None, args.land_name_key, args.land_parent_key)
        img = overlay_coastlines(img, land, cfg, grid.extent)
    write_png(img, args.out)
    log.info("wrote %s (%dx%d)", args.out, img.width, img.height)
    return EXIT_OK


def cmd_spot(args) -> int:
    colors = [c.strip() for c in args.colors.split(",") if c.strip()]
    bad = [c for c in colors if c not in GROUPS]
    if bad or not colors:
        raise UsageError(f"--colors must list groups from {', '.join(GROUPS)}")
    cfg = build_spot_config(_section(args, "spot"), args.seed, load_table(args.palette))
    img = read_png(args.image)
    image_ref = args.image_ref or Path(args.image).name
    result = run_spot(img, colors, cfg, _extent(args.extent), image_ref=image_ref)
    atomic_write_text(args.out, result.to_json())
    if args.annotate:
        write_png(annotate(img, result), args.annotate)
    n = sum(len(r.pixel_points) for regions in result.colors.values() for r in regions)
    log.info("wrote %s (%d points)", args.out, n)
    return EXIT_OK


def cmd_geoindex(args) -> int:
    land, ocean = _boundaries(args)
    land_idx, ocean_idx = build_index(land, args.cell), build_index(ocean, args.cell)
    if args.points:
        if not args.out:
            raise UsageError("geoindex --points requires --out")
        result = SpotResult.from_dict(_read_json(args.points))
        named = name_points(result, land_idx, ocean_idx, args.tol)
        atomic_write_text(args.out, named.to_json())
        log.info("wrote %s (%d unnamed point(s) dropped)", args.out, named.dropped_unknown)
        return EXIT_OK
    if args.lat is None or args.lon is None:
        raise UsageError("geoindex needs either --points or both --lat and --lon")
    rec = locate(land_idx, ocean_idx, (args.lat, args.lon), args.tol)
    text = json.dumps(rec.to_dict()) + "\n"
    if args.out:
        atomic_write_text(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_generate(args) -> int:
    files = list(args.named)
    if args.named_dir:
        files += sorted(str(p) for p in Path(args.named_dir).glob("*.json"))
    if not files:
        raise UsageError("generate needs --named files or --named-dir")
    named = [NamedPoints.from_dict(_read_json(f)) for f in files]
    cfg = build_gen_config(_section(args, "gen"), args.seed)
    land, ocean = _boundaries(args)
    records, stats = generate_dataset(named, cfg, gazetteer(land, ocean))
    atomic_write_text(args.out, dumps_jsonl(records))
    if args.stats:
        atomic_write_text(args.stats, json.dumps(stats, indent=1, sort_keys=True) + "\n")
    log.info("wrote %s (%d records from %d image(s))", args.out, len(records), len(named))
    return EXIT_OK


def cmd_evaluate(args) -> int:
    with open(args.gold, encoding="utf-8") as fh:
        golds = read_jsonl(fh)
    with open(args.pred, encoding="utf-8") as fh:
        preds = read_jsonl(fh, as_records=False)
    judge = None
    if args.judge_config:
        judge = JudgeClient(JudgeConfig.from_file(args.judge_config))
    try:
        report, details = evaluate(preds, golds, judge)
    finally:
        if judge is not None:
            judge.close()
    text = json.dumps(report, indent=1) + "\n"
    if args.out:
        atomic_write_text(args.out, text)
    else:
        sys.stdout.write(text)
    if args.details:
        atomic_write_text(args.details, dumps_jsonl(details))
    return EXIT_OK


def cmd_stats(args) -> int:
    stats = grid_stats(read_wgf(args.grid), load_table(args.palette))
    text = json.dumps(stats) + "\n"
    if args.out:
        atomic_write_text(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_pipeline(args) -> int:
    cfg = load_config(args.config, {"seed": args.seed, "workers": args.workers, "grids": args.grids, "output": args.output})
    manifest = run_pipeline(cfg)
    return exit_status(manifest)


# -- parser -------------------------------------------------------------------------


def _boundary_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--land", help="land GeoJSON (bundled fixture if omitted)")
    p.add_argument("--ocean", help="ocean GeoJSON (bundled fixture if omitted)")
    p.add_argument("--land-name-key", default="name")
    p.add_argument("--land-parent-key", default="parent")
    p.add_argument("--ocean-name-key", default="name")
    p.add_argument("--ocean-parent-key", default="parent")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gustvqa", description="Wind-gust heatmap VQA dataset pipeline")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("render", help="render a WGF grid to a Beaufort heatmap PNG")
    p.add_argument("--grid", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="JSON config; its 'render' section is used")
    p.add_argument("--palette")
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)
    p.add_argument("--no-coastlines", action="store_true")
    _boundary_flags(p)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("spot", help="extract representative points from a heatmap")
    p.add_argument("--image", required=True)
    p.add_argument("--colors", default=",".join(GROUPS))
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", help="JSON config; its 'spot' section is used")
    p.add_argument("--palette")
    p.add_argument("--extent", help="N,S,W,E in degrees (full globe by default)")
    p.add_argument("--image-ref", help="image name stored in the output (file name by default)")
    p.add_argument("--annotate", help="also write a PNG with the points marked")
    p.set_defaults(func=cmd_spot)

    p = sub.add_parser("geoindex", help="name SPOT points, or look up one coordinate")
    p.add_argument("--points")
    p.add_argument("--out")
    p.add_argument("--lat", type=float)
    p.add_argument("--lon", type=float)
    p.add_argument("--tol", type=float, default=1.0)
    p.add_argument("--cell", type=float, default=5.0, help="index cell size in degrees")
    _boundary_flags(p)
    p.set_defaults(func=cmd_geoindex)

    p = sub.add_parser("generate", help="generate the QA dataset from named points")
    p.add_argument("--named", nargs="*", default=[])
    p.add_argument("--named-dir")
    p.add_argument("--out", required=True)
    p.add_argument("--stats")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", help="JSON config; its 'gen' section is used")
    _boundary_flags(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("evaluate", help="score predictions against a gold dataset")
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--out")
    p.add_argument("--details", help="per-record detail JSONL")
    p.add_argument("--judge-config", help="JudgeConfig JSON; enables LLM-judge scores")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("stats", help="per-Beaufort-level cell counts of a grid")
    p.add_argument("--grid", required=True)
    p.add_argument("--palette")
    p.add_argument("--out")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("pipeline", help="run the whole pipeline from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--grids")
    p.add_argument("--output")
    p.set_defaults(func=cmd_pipeline)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, WGFError, BoundaryError, JSONLError, EvalError, JudgeError, FileNotFoundError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
