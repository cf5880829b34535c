"""On-disk workspace shared by the command-line steps.

Everything is JSON or CSV. CSV files start with a ``# config_hash=...`` line;
JSON files carry a ``config_hash`` key. Timing lives in separate ``*_meta.json``
files so result files stay byte-identical across machines and thread counts.
"""

from __future__ import annotations

import csv
import datetime as dt
import hashlib
import json
import logging
from pathlib import Path
from typing import Iterable, Sequence

from .config import RunConfig
from .errors import InvalidInputError, StateError
from .geodata import (
    GeoPoint, HexGrid, Hexagon, assign_population, build_grid, filter_low_density, read_population_csv,
)
from .gtfs import Timetable, build_timetable, default_service_date, parse_feed, timetable_stats
from .router import WalkModel

log = logging.getLogger(__name__)

ROLES_FILE = "synthetic_roles.json"
FORMAT_VERSION = 1


def write_json(path: Path, data: dict) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_json(path: Path) -> dict:
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise StateError(f"{path} not found") from None


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence], config_hash: str) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        fh.write(f"# config_hash={config_hash}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def read_csv(path: Path) -> list[dict[str, str]]:
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            return list(csv.DictReader(line for line in fh if not line.startswith("#")))
    except FileNotFoundError:
        raise StateError(f"{path} not found") from None


# -- inputs ----------------------------------------------------------------

def _service_date(cfg: RunConfig, feed) -> dt.date:
    if cfg.service_date:
        try:
            return dt.date.fromisoformat(cfg.service_date)
        except ValueError:
            raise InvalidInputError(f"service_date {cfg.service_date!r} is not YYYY-MM-DD") from None
    return default_service_date(feed)


def load_timetable(cfg: RunConfig) -> Timetable:
    if not cfg.gtfs_dir:
        raise InvalidInputError("gtfs_dir is not set")
    if not Path(cfg.gtfs_dir).is_dir():
        raise InvalidInputError(f"GTFS directory not found: {cfg.gtfs_dir}")
    feed = parse_feed(cfg.gtfs_dir)
    return build_timetable(
        feed, _service_date(cfg, feed), line_grouping=cfg.line_grouping, min_transfer_s=cfg.min_transfer_s,
        footpath_radius_m=cfg.footpath_radius_m, walk_speed_mps=cfg.walk_speed_mps, walk_detour=cfg.walk_detour,
    )


def load_population(cfg: RunConfig) -> list[tuple[GeoPoint, int]]:
    if not cfg.population_csv:
        raise InvalidInputError("population_csv is not set")
    try:
        return read_population_csv(cfg.population_csv)
    except FileNotFoundError:
        raise InvalidInputError(f"population CSV not found: {cfg.population_csv}") from None


def derive_bbox(cells, side_m: float) -> tuple[float, float, float, float]:
    if not cells:
        raise InvalidInputError("population CSV has no cells; cannot derive a bbox")
    pad = side_m / 111_195.0
    lats = [p.lat for p, _ in cells]
    lons = [p.lon for p, _ in cells]
    return min(lats) - pad, min(lons) - pad, max(lats) + pad, max(lons) + pad


def make_grid(cfg: RunConfig, cells) -> HexGrid:
    s, w, n, e = cfg.bbox
    grid = build_grid((GeoPoint(s, w), GeoPoint(n, e)), cfg.side_m)
    return filter_low_density(assign_population(grid, cells), cfg.min_density)


def load_walk_model(cfg: RunConfig) -> WalkModel:
    matrix = None
    if cfg.walk_matrix_csv:
        path = Path(cfg.walk_matrix_csv)
        matrix = {}
        try:
            with path.open(newline="", encoding="utf-8") as fh:
                for lineno, row in enumerate(csv.DictReader(fh), start=2):
                    try:
                        matrix[(int(row["hex_id"]), row["stop_id"])] = float(row["seconds"])
                    except (KeyError, TypeError, ValueError) as exc:
                        raise InvalidInputError(f"{path}:{lineno}: {exc}") from None
        except FileNotFoundError:
            raise InvalidInputError(f"walk matrix not found: {path}") from None
    return WalkModel(cfg.walk_speed_mps, cfg.walk_detour, cfg.max_access_s, matrix)


# -- workspace snapshots ---------------------------------------------------

def save_grid(path: Path, grid: HexGrid, config_hash: str) -> None:
    # repr keeps every coordinate bit-exact across a save/load cycle
    rows = ([h.id, repr(h.center.lat), repr(h.center.lon), h.q, h.r, h.population] for h in grid.hexagons)
    write_csv(path, ["hex_id", "lat", "lon", "q", "r", "population"], rows, config_hash)


def load_grid(ws: Path) -> HexGrid:
    manifest = read_json(ws / "manifest.json")
    g = manifest["grid"]
    hexes = tuple(
        Hexagon(int(r["hex_id"]), GeoPoint(float(r["lat"]), float(r["lon"])), int(r["population"]),
                int(r["q"]), int(r["r"]))
        for r in read_csv(ws / "grid.csv")
    )
    return HexGrid(hexes, float(g["side_m"]), GeoPoint(*g["origin"]))


def ingest(cfg: RunConfig, ws: Path) -> dict:
    """Validate inputs and write config, grid, timetable stats and manifest."""
    tt = load_timetable(cfg)
    cells = load_population(cfg)
    if cfg.bbox is None:
        cfg = cfg.with_overrides({"bbox": list(derive_bbox(cells, cfg.side_m))})
    if cfg.service_date is None and tt.service_date is not None:
        cfg = cfg.with_overrides({"service_date": tt.service_date.isoformat()})
    grid = make_grid(cfg, cells)
    if len(grid) == 0:
        log.warning("no hexagon passes the density filter")
    h = cfg.hash()
    ws.mkdir(parents=True, exist_ok=True)
    write_json(ws / "config.json", cfg.to_dict())
    save_grid(ws / "grid.csv", grid, h)
    write_json(ws / "timetable_stats.json", {"config_hash": h, **timetable_stats(tt)})
    roles_path = Path(cfg.gtfs_dir) / ROLES_FILE
    roles = json.loads(roles_path.read_text(encoding="utf-8")) if roles_path.exists() else {}
    digest = hashlib.sha256()
    for name in ("config.json", "grid.csv", "timetable_stats.json"):
        digest.update((ws / name).read_bytes())
    manifest = {
        "format": FORMAT_VERSION,
        "config_hash": h,
        "hexagons": len(grid),
        "population": grid.total_population,
        "dropped_cells": grid.dropped_cells,
        "dropped_population": grid.dropped_population,
        "stops": len(tt.stops),
        "lines": len(tt.lines),
        "connections": len(tt.connections),
        "service_date": cfg.service_date,
        "grid": {"side_m": grid.side_m, "origin": [grid.origin.lat, grid.origin.lon]},
        "roles": roles,
        "checksum": digest.hexdigest(),
    }
    write_json(ws / "manifest.json", manifest)
    return manifest


def open_workspace(ws: Path) -> RunConfig:
    if not (ws / "manifest.json").exists():
        raise StateError(f"{ws} is not an ingested workspace (run `ingest` first)")
    return RunConfig.from_dict(read_json(ws / "config.json"))
