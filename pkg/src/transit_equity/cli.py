"""Command-line entry point.

Exit codes: 0 ok, 2 invalid input, 3 missing state or degenerate data.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import fields
from pathlib import Path

from .accessibility import AccessibilityField, WalkTables, accessibility_field, field_rows
from .config import RunConfig
from .equity import exact_scores, gini, lorenz
from .errors import DegenerateInputError, InvalidInputError, StateError
from .geodata import grid_geojson, write_population_csv
from .gtfs import write_feed
from .importance import compute_fast_scores
from .stats import correlate, rank_lines
from .synth import SynthSpec, synthesize_network
from .workspace import (
    ROLES_FILE, ingest, load_grid, load_timetable, load_walk_model, open_workspace, read_csv, read_json,
    write_csv, write_json,
)

log = logging.getLogger("transit_equity")

# keys fixed at ingest time; later steps must not silently disagree with the stored grid
GRID_KEYS = ("gtfs_dir", "population_csv", "bbox", "side_m", "min_density")
PATH_KEYS = ("gtfs_dir", "population_csv", "walk_matrix_csv")


def _add_config_flags(p: argparse.ArgumentParser, include_grid: bool) -> None:
    g = p.add_argument_group("configuration overrides")
    for f in fields(RunConfig):
        if f.name in GRID_KEYS and not include_grid:
            continue
        flag = "--" + f.name.replace("_", "-")
        if f.name == "bbox":
            g.add_argument(flag, type=float, nargs=4, metavar=("S", "W", "N", "E"), default=None)
        elif f.name in ("threads", "seed"):
            g.add_argument(flag, type=int, default=None)
        elif f.type in ("float", float):
            g.add_argument(flag, type=float, default=None)
        else:
            g.add_argument(flag, default=None)


def _overrides(args: argparse.Namespace) -> dict:
    names = {f.name for f in fields(RunConfig)}
    return {k: v for k, v in vars(args).items() if k in names and v is not None}


def _resolve_paths(cfg: RunConfig, base: Path) -> RunConfig:
    fixed = {}
    for key in PATH_KEYS:
        value = getattr(cfg, key)
        if value and not Path(value).is_absolute():
            fixed[key] = str((base / value).resolve())
    return cfg.with_overrides(fixed)


def _workspace_config(args) -> tuple[Path, RunConfig]:
    ws = Path(args.workspace)
    cfg = open_workspace(ws).with_overrides(_overrides(args))
    return ws, cfg


def _scan_setup(ws: Path, cfg: RunConfig):
    grid = load_grid(ws)
    tt = load_timetable(cfg)
    walk = load_walk_model(cfg)
    tables = WalkTables.build(grid, tt.stops, walk, cfg.horizon_s)
    return grid, tt, walk, tables


# -- commands --------------------------------------------------------------

def cmd_ingest(args) -> int:
    cfg = RunConfig()
    if args.config:
        cfg = _resolve_paths(RunConfig.load(args.config), Path(args.config).resolve().parent)
    cfg = _resolve_paths(cfg.with_overrides(_overrides(args)), Path.cwd())
    manifest = ingest(cfg, Path(args.workspace))
    print(f"hexagons={manifest['hexagons']} connections={manifest['connections']} lines={manifest['lines']} "
          f"checksum={manifest['checksum'][:12]}")
    return 0


def _load_field(ws: Path) -> AccessibilityField:
    meta = read_json(ws / "accessibility_meta.json")
    scores = {int(r["hex_id"]): int(r["accessibility"]) for r in read_csv(ws / "accessibility.csv")}
    return AccessibilityField(meta["depart"], meta["horizon"], scores, meta["line_set_tag"], meta["scans"])


def cmd_accessibility(args) -> int:
    ws, cfg = _workspace_config(args)
    grid, tt, walk, tables = _scan_setup(ws, cfg)
    t0 = time.perf_counter()
    field = accessibility_field(grid, tt, walk, depart=cfg.depart_s, horizon=cfg.horizon_s,
                                threads=cfg.threads, tables=tables)
    wall = time.perf_counter() - t0
    h = cfg.hash()
    write_csv(ws / "accessibility.csv", ["hex_id", "lat", "lon", "population", "accessibility"],
              field_rows(grid, field), h)
    write_json(ws / "accessibility_meta.json", {
        "config_hash": h, "depart": field.depart, "horizon": field.horizon, "line_set_tag": field.line_set_tag,
        "scans": field.scans, "wall_s": wall, "threads": cfg.threads})
    print(f"hexagons={len(field.scores)} wall_s={wall:.3f}")
    return 0


def cmd_gini(args) -> int:
    ws, cfg = _workspace_config(args)
    grid = load_grid(ws)
    if not (ws / "accessibility.csv").exists():
        raise StateError("accessibility layer not computed yet; run `accessibility` first")
    field = _load_field(ws)
    g = gini(field, grid)
    curve = lorenz(field, grid)
    h = cfg.hash()
    write_json(ws / "gini.json", {"config_hash": h, "gini": g.value})
    write_csv(ws / "lorenz.csv", ["x", "y"], ([repr(x), repr(y)] for x, y in curve.points), h)
    print(f"gini={g.value:.6f}")
    return 0


def cmd_score(args) -> int:
    ws, cfg = _workspace_config(args)
    grid, tt, walk, tables = _scan_setup(ws, cfg)
    h = cfg.hash()
    names = {lid: line.name for lid, line in tt.lines.items()}
    if args.method == "fast":
        fs, field, cum = compute_fast_scores(grid, tt, walk, depart=cfg.depart_s, horizon=cfg.horizon_s,
                                             percentile=cfg.percentile, weighting=cfg.percentile_weighting,
                                             threads=cfg.threads, tables=tables)
        write_csv(ws / "scores_fast.csv", ["line_id", "line_name", "e_score"],
                  ([lid, names[lid], repr(fs.e[lid])] for lid in sorted(fs.e)), h)
        rows = []
        for k, hex_id in enumerate(cum.hex_order):
            for j, lid in enumerate(cum.lines):
                rows.append([k + 1, hex_id, lid, repr(float(cum.prefix[k, j]))])
        write_csv(ws / "cumulative_importance.csv", ["rank", "hex_id", "line_id", "I"], rows, h)
        meta = {"method": "fast", "base_gini": fs.base_gini, "percentile": fs.percentile, "rank": fs.rank,
                "hex_id": fs.hex_id, "scans": fs.scans, "wall_s": fs.wall_s}
    else:
        ex = exact_scores(grid, tt, walk, depart=cfg.depart_s, horizon=cfg.horizon_s, threads=cfg.threads,
                          tables=tables)
        write_csv(ws / "scores_exact.csv", ["line_id", "line_name", "delta_g"],
                  ([lid, names[lid], repr(ex.delta_g[lid])] for lid in sorted(ex.delta_g)), h)
        meta = {"method": "exact", "base_gini": ex.base.value, "scans": ex.scans, "wall_s": ex.wall_s}
    meta.update({"config_hash": h, "hexagons": len(grid), "lines": len(tt.lines), "threads": cfg.threads})
    write_json(ws / f"score_{args.method}_meta.json", meta)
    print(f"method={args.method} lines={len(tt.lines)} scans={meta['scans']} wall_s={meta['wall_s']:.3f} "
          f"base_gini={meta['base_gini']:.6f}")
    return 0


def _read_scores(path: Path, column: str) -> dict[str, float]:
    if not path.exists():
        raise StateError(f"{path.name} missing; run `score` first")
    return {r["line_id"]: float(r[column]) for r in read_csv(path)}


def cmd_correlate(args) -> int:
    ws, cfg = _workspace_config(args)
    exact = _read_scores(ws / "scores_exact.csv", "delta_g")
    fast = _read_scores(ws / "scores_fast.csv", "e_score")
    common = sorted(set(exact) & set(fast))
    if len(common) < 3:
        raise DegenerateInputError(f"only {len(common)} lines appear in both score files; need >= 3")
    rep = correlate([fast[l] for l in common], [exact[l] for l in common])
    h = cfg.hash()
    write_json(ws / "correlation.json", {**rep.as_dict(), "config_hash": h})
    for name, scores in (("exact", exact), ("fast", fast)):
        ranked = rank_lines({l: scores[l] for l in common})
        write_csv(ws / f"ranking_{name}.csv", ["rank", "line_id", "value"],
                  ([k + 1, l, repr(v)] for k, (l, v) in enumerate(ranked)), h)
    print(f"r={rep.r:.4f} p={rep.p:.3g} n={rep.n}")
    return 0


def cmd_synth(args) -> int:
    spec = SynthSpec.load(args.spec) if args.spec else SynthSpec()
    city = synthesize_network(spec, args.seed)
    out = Path(args.out)
    gtfs = out / "gtfs"
    write_feed(city.feed, gtfs)
    write_json(gtfs / ROLES_FILE, city.roles)
    write_population_csv(out / "population.csv", city.population)
    sw, ne = city.bbox
    cfg = RunConfig(gtfs_dir="gtfs", population_csv="population.csv",
                    bbox=(sw.lat, sw.lon, ne.lat, ne.lon), seed=args.seed)
    write_json(out / "config.json", cfg.to_dict())
    write_json(out / "synth_spec.json", spec.to_dict())
    print(f"lines={len(city.feed.routes)} trips={len(city.feed.trips)} cells={len(city.population)} "
          f"roles={json.dumps(city.roles, sort_keys=True)}")
    return 0


def cmd_export_geojson(args) -> int:
    ws, cfg = _workspace_config(args)
    grid = load_grid(ws)
    h = cfg.hash()
    if args.layer == "grid":
        out = Path(args.out or ws / "grid.geojson")
        gj = grid_geojson(grid)
    else:
        if not (ws / "accessibility.csv").exists():
            raise StateError(f"the {args.layer} export needs the accessibility layer; run `accessibility` first")
        field = _load_field(ws)
        if args.layer == "lorenz":
            out = Path(args.out or ws / "lorenz.csv")
            write_csv(out, ["x", "y"], ([repr(x), repr(y)] for x, y in lorenz(field, grid).points), h)
            print(out)
            return 0
        out = Path(args.out or ws / "accessibility.geojson")
        gj = grid_geojson(grid, {hid: {"accessibility": a} for hid, a in field.scores.items()})
    gj["config_hash"] = h
    out.write_text(json.dumps(gj, separators=(",", ":")) + "\n", encoding="utf-8")
    print(out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="transit-equity", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse inputs and write a workspace")
    p.add_argument("--config", help="JSON file with run configuration keys")
    p.add_argument("--workspace", required=True)
    _add_config_flags(p, include_grid=True)
    p.set_defaults(func=cmd_ingest)

    for name, func, helptext in (("accessibility", cmd_accessibility, "accessibility score per hexagon"),
                                 ("gini", cmd_gini, "Gini index and Lorenz curve of the accessibility field"),
                                 ("correlate", cmd_correlate, "correlate fast and exact line scores")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--workspace", required=True)
        _add_config_flags(p, include_grid=False)
        p.set_defaults(func=func)

    p = sub.add_parser("score", help="per-line equity scores")
    p.add_argument("--workspace", required=True)
    p.add_argument("--method", choices=("exact", "fast"), required=True)
    _add_config_flags(p, include_grid=False)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("synth", help="write a synthetic city (GTFS + population CSV)")
    p.add_argument("--spec", help="JSON file of synthetic-city parameters")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("export-geojson", help="export a layer for external mapping tools")
    p.add_argument("--workspace", required=True)
    p.add_argument("--layer", choices=("accessibility", "grid", "lorenz"), required=True)
    p.add_argument("--out")
    _add_config_flags(p, include_grid=False)
    p.set_defaults(func=cmd_export_geojson)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (DegenerateInputError, StateError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except InvalidInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
