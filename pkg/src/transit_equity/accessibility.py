"""Sociality accessibility: residents reachable from each hexagon within the time budget."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import InvalidInputError
from .geodata import EARTH_RADIUS_M, HexGrid
from .gtfs import Stop, Timetable
from .router import INF, ArrivalState, Query, WalkModel, earliest_arrival, journey_tree

DEFAULT_DEPART = 28_800.0
DEFAULT_HORIZON = 3_600.0


@dataclass(frozen=True)
class AccessibilityField:
    depart: float
    horizon: float
    scores: dict[int, int]
    line_set_tag: str = "all"
    scans: int = 0

    def __getitem__(self, hex_id: int) -> int:
        return self.scores[hex_id]


def _approx_dist_matrix(a_lat, a_lon, b_lat, b_lon) -> np.ndarray:
    a_lat, a_lon, b_lat, b_lon = (np.radians(np.asarray(v, dtype=float)) for v in (a_lat, a_lon, b_lat, b_lon))
    dphi = b_lat[None, :] - a_lat[:, None]
    dlam = b_lon[None, :] - a_lon[:, None]
    h = np.sin(dphi / 2) ** 2 + np.cos(a_lat)[:, None] * np.cos(b_lat)[None, :] * np.sin(dlam / 2) ** 2
    return 2 * EARTH_RADIUS_M * np.arcsin(np.sqrt(np.clip(h, 0, 1)))


@dataclass(frozen=True, eq=False)
class WalkTables:
    """Walk legs shared by every scan over one grid and stop set.

    ``access[h]`` lists ``(stop_id, seconds)`` reachable from hexagon ``h``;
    ``egress[s]`` the ``(hex_id, seconds)`` pairs reachable from stop index ``s``;
    ``on_foot[h]`` the hexagons whose centers are walkable from ``h`` within the horizon.
    """

    walk: WalkModel
    horizon: float
    access: dict[int, list[tuple[str, float]]]
    egress: list[list[tuple[int, float]]]
    on_foot_s: dict[int, tuple[tuple[int, float], ...]]

    @property
    def on_foot(self) -> dict[int, tuple[int, ...]]:
        return {h: tuple(k for k, _ in v) for h, v in self.on_foot_s.items()}

    @classmethod
    def build(cls, grid: HexGrid, stops: Sequence[Stop], walk: WalkModel, horizon: float) -> "WalkTables":
        hexes = grid.hexagons
        access: dict[int, list[tuple[str, float]]] = {h.id: [] for h in hexes}
        egress: list[list[tuple[int, float]]] = [[] for _ in stops]
        if walk.matrix is not None:
            sidx = {s.id: i for i, s in enumerate(stops)}
            for (hid, sid), w in sorted(walk.matrix.items()):
                if hid in access and sid in sidx and w <= walk.max_access_s:
                    access[hid].append((sid, float(w)))
                    egress[sidx[sid]].append((hid, float(w)))
        elif hexes and stops:
            # vectorised prefilter, exact scalar recomputation on candidates
            reach_m = walk.max_access_s * walk.speed_mps / walk.detour
            d = _approx_dist_matrix([h.center.lat for h in hexes], [h.center.lon for h in hexes],
                                    [s.location.lat for s in stops], [s.location.lon for s in stops])
            for i, j in zip(*np.nonzero(d <= reach_m * 1.001 + 1.0)):
                h, s = hexes[i], stops[j]
                w = walk.seconds(h.center, s.location)
                if w <= walk.max_access_s:
                    access[h.id].append((s.id, w))
                    egress[j].append((h.id, w))
        for lst in egress:
            lst.sort()

        on_foot: dict[int, tuple[tuple[int, float], ...]] = {}
        if hexes:
            reach_m = horizon * walk.speed_mps / walk.detour
            lat = [h.center.lat for h in hexes]
            lon = [h.center.lon for h in hexes]
            d = _approx_dist_matrix(lat, lon, lat, lon)
            for i, h in enumerate(hexes):
                near = []
                for j in np.nonzero(d[i] <= reach_m * 1.001 + 1.0)[0]:
                    w = walk.seconds(h.center, hexes[j].center)
                    if w <= horizon:
                        near.append((hexes[j].id, w))
                on_foot[h.id] = tuple(sorted(near))
        return cls(walk, horizon, access, egress, on_foot)


def hex_arrivals(tables: WalkTables, hex_id: int, state: ArrivalState) -> dict[int, tuple[float, int]]:
    """Earliest arrival at each reached hexagon center and the stop index it comes from.

    Stop index ``-1`` marks the origin itself or a pure walk; on equal times a
    pure walk wins, then the lowest stop index.
    """
    depart = state.depart
    limit = depart + state.horizon
    grid_walk = tables.on_foot_s
    out: dict[int, tuple[float, int]] = {hex_id: (depart, -1)}
    for h, w in grid_walk.get(hex_id, ()):
        if h != hex_id:
            out[h] = (depart + w, -1)
    egress = tables.egress
    for s, t in enumerate(state.arrival):
        if t == INF:
            continue
        for h, w in egress[s]:
            a = t + w
            if a <= limit and (h not in out or a < out[h][0]):
                out[h] = (a, s)
    return out


def reachable_hexes(tables: WalkTables, hex_id: int, state: ArrivalState) -> set[int]:
    """Hexagons reached from ``hex_id``: itself, by pure walk, or by egress from a reached stop."""
    return set(hex_arrivals(tables, hex_id, state))


@dataclass(frozen=True, eq=False)
class _Context:
    grid: HexGrid
    tt: Timetable
    tables: WalkTables
    depart: float
    horizon: float


def _scan_hex(ctx: _Context, tt: Timetable, hex_id: int, with_importance: bool):
    grid = ctx.grid
    q = Query(grid[hex_id].center, ctx.depart, ctx.horizon)
    state = earliest_arrival(tt, q, ctx.tables.access[hex_id])
    reached = hex_arrivals(ctx.tables, hex_id, state)
    score = sum(grid[h].population for h in reached)
    if not with_importance:
        return score, None
    tree = journey_tree(state, tt, hex_id, targets={s for _, s in reached.values() if s >= 0})
    from .importance import line_importance  # local: importance imports this module
    return score, line_importance(tree)


def _field_task(ctx: _Context, removed: str | None, with_importance: bool):
    tt = ctx.tt
    if removed is not None:
        from .gtfs import remove_line
        tt = remove_line(tt, removed)
    scores, imp = {}, {}
    for h in ctx.grid.ids:
        scores[h], imp[h] = _scan_hex(ctx, tt, h, with_importance)
    return tt.tag, scores, imp


def _hex_chunk_task(ctx: _Context, hex_ids: Sequence[int], with_importance: bool):
    return [(h, *_scan_hex(ctx, ctx.tt, h, with_importance)) for h in hex_ids]


_WORKER_CTX: _Context | None = None


def _init_worker(ctx: _Context) -> None:
    global _WORKER_CTX
    _WORKER_CTX = ctx


def _call(args):
    func, rest = args
    return func(_WORKER_CTX, *rest)


def run_tasks(ctx: _Context, func: Callable, tasks: Iterable[tuple], threads: int = 1) -> list:
    """Map ``func(ctx, *task)`` over tasks, preserving task order.

    ``threads > 1`` uses a process pool; results are identical to the sequential path.
    """
    tasks = list(tasks)
    if threads <= 1 or len(tasks) <= 1:
        return [func(ctx, *t) for t in tasks]
    with ProcessPoolExecutor(max_workers=threads, initializer=_init_worker, initargs=(ctx,)) as pool:
        return list(pool.map(_call, [(func, t) for t in tasks]))


def make_context(grid: HexGrid, tt: Timetable, walk: WalkModel | None = None, *,
                 depart: float = DEFAULT_DEPART, horizon: float = DEFAULT_HORIZON,
                 tables: WalkTables | None = None) -> _Context:
    walk = walk or WalkModel()
    if tables is None or tables.horizon != horizon or tables.walk != walk:
        tables = WalkTables.build(grid, tt.stops, walk, horizon)
    return _Context(grid, tt, tables, float(depart), float(horizon))


def evaluate(ctx: _Context, *, with_importance: bool, threads: int = 1):
    """One scan per hexagon; returns ``(scores, importance)`` keyed by hexagon id."""
    ids = ctx.grid.ids
    n_chunks = max(1, min(len(ids), 4 * max(1, threads)))
    chunks = [(ids[k::n_chunks], with_importance) for k in range(n_chunks)]
    results = run_tasks(ctx, _hex_chunk_task, chunks, threads)
    scores, imp = {}, {}
    for part in results:
        for h, score, i in part:
            scores[h] = score
            imp[h] = i
    order = sorted(scores)
    return {h: scores[h] for h in order}, {h: imp[h] for h in order}


def accessibility_of(grid: HexGrid, tt: Timetable, hex_id: int, q: Query,
                     walk: WalkModel | None = None, tables: WalkTables | None = None) -> int:
    if hex_id not in grid:
        raise InvalidInputError(f"unknown hexagon id {hex_id}")
    ctx = make_context(grid, tt, walk, depart=q.depart, horizon=q.horizon, tables=tables)
    return _scan_hex(ctx, tt, hex_id, False)[0]


def accessibility_field(grid: HexGrid, tt: Timetable, walk: WalkModel | None = None, *,
                        depart: float = DEFAULT_DEPART, horizon: float = DEFAULT_HORIZON,
                        threads: int = 1, tables: WalkTables | None = None) -> AccessibilityField:
    ctx = make_context(grid, tt, walk, depart=depart, horizon=horizon, tables=tables)
    scores, _ = evaluate(ctx, with_importance=False, threads=threads)
    return AccessibilityField(ctx.depart, ctx.horizon, scores, tt.tag, scans=len(scores))


def walk_floor_radius_m(walk: WalkModel, horizon: float) -> float:
    """Straight-line radius reachable on foot alone."""
    return horizon * walk.speed_mps / walk.detour


def field_rows(grid: HexGrid, field: AccessibilityField) -> list[list]:
    return [[h.id, f"{h.center.lat:.6f}", f"{h.center.lon:.6f}", h.population, field.scores[h.id]]
            for h in grid.hexagons]
