"""One-to-all earliest-arrival scanning over a connection timetable.

Each stop carries two labels:

* ``arrival`` -- earliest time a traveller can stand at the stop, by any means;
  it drives footpaths and egress walks.
* ``ready`` -- earliest time the traveller can board a vehicle there. Walking
  arrivals are ready immediately; alighting from a vehicle adds the minimum
  transfer slack.

Keeping both labels matters: the earliest arrival may come from a vehicle
whose slack makes it *later* to board than a slightly later walking arrival.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .errors import InvalidInputError
from .geodata import GeoPoint, HexGrid, great_circle_m
from .gtfs import Stop, Timetable

INF = math.inf

# predecessor codes: >= 0 connection index, ORIGIN, or FOOT_BASE - u for a footpath from stop u
ORIGIN = -1
FOOT_BASE = -2


@dataclass(frozen=True)
class Query:
    origin: GeoPoint
    depart: float = 28_800.0
    horizon: float = 3_600.0

    def __post_init__(self):
        if self.horizon <= 0:
            raise InvalidInputError("horizon must be positive")

    @property
    def limit(self) -> float:
        return self.depart + self.horizon


@dataclass(frozen=True)
class WalkModel:
    """Straight-line walking with a detour factor.

    ``matrix`` optionally overrides hexagon/stop walk times, keyed by
    ``(hex_id, stop_id)``; pairs absent from it are treated as unwalkable.
    """

    speed_mps: float = 1.39
    detour: float = 1.3
    max_access_s: float = 1200.0
    matrix: Mapping[tuple[int, str], float] | None = None

    def __post_init__(self):
        if self.speed_mps <= 0 or self.detour < 1 or self.max_access_s < 0:
            raise InvalidInputError("invalid walk parameters")

    def seconds(self, a: GeoPoint, b: GeoPoint) -> float:
        return self.detour * great_circle_m(a, b) / self.speed_mps


@dataclass
class ArrivalState:
    depart: float
    horizon: float
    arrival: list[float]
    ready: list[float]
    pred_arrival: list[int]
    pred_ready: list[int]
    # connection index -> previous connection of the same ride (-1 where boarded)
    ride_prev: dict[int, int] = field(default_factory=dict)

    def reached(self) -> list[int]:
        return [s for s, t in enumerate(self.arrival) if t < INF]

    def arrival_by_stop(self, tt: Timetable) -> dict[str, float]:
        return {tt.stops[s].id: t for s, t in enumerate(self.arrival) if t < INF}


@dataclass(frozen=True)
class JourneyTree:
    origin: int | None
    used: tuple[int, ...]  # indices into tt.connections, ascending
    lines: tuple[str, ...]
    lengths_m: tuple[float, ...]
    arrival: dict[str, float]


def access_stops(
    grid: HexGrid,
    hex_id: int,
    stops: Sequence[Stop],
    walk_speed_mps: float = 1.39,
    detour: float = 1.3,
    max_access_s: float = 1200.0,
) -> list[tuple[str, float]]:
    """Stops within the access budget from a hexagon barycenter, with walk seconds."""
    center = grid[hex_id].center
    out = []
    for s in stops:
        w = detour * great_circle_m(center, s.location) / walk_speed_mps
        if w <= max_access_s:
            out.append((s.id, w))
    return out


def earliest_arrival(tt: Timetable, q: Query, access: Sequence[tuple[str, float]]) -> ArrivalState:
    sa = tt.scan_arrays
    n = len(tt.stops)
    limit = q.limit
    slack = tt.min_transfer_s
    arrival = [INF] * n
    ready = [INF] * n
    pred_a = [ORIGIN] * n
    pred_r = [ORIGIN] * n
    fps = sa.footpaths

    def relax(s0: int) -> None:
        stack = [s0]
        while stack:
            u = stack.pop()
            base = arrival[u]
            for v, d in fps[u]:
                t = base + d
                if t > limit:
                    continue
                if t < arrival[v]:
                    arrival[v] = t
                    pred_a[v] = FOOT_BASE - u
                    stack.append(v)
                if t < ready[v]:
                    ready[v] = t
                    pred_r[v] = FOOT_BASE - u

    sidx = tt.stop_index
    seeds = []
    for sid, w in access:
        s = sidx[sid]
        t = q.depart + w
        if t <= limit and t < arrival[s]:
            arrival[s] = t
            pred_a[s] = ORIGIN
            seeds.append(s)
        if t <= limit and t < ready[s]:
            ready[s] = t
            pred_r[s] = ORIGIN
    for s in seeds:
        relax(s)

    dep, arr, frm, to, trip = sa.dep, sa.arr, sa.frm, sa.to, sa.trip
    trip_last = [-1] * sa.n_trips
    ride_prev: dict[int, int] = {}
    for i in range(sa.first_departing_at(q.depart), len(dep)):
        d = dep[i]
        if d > limit:
            break
        t_idx = trip[i]
        last = trip_last[t_idx]
        if last >= 0:
            ride_prev[i] = last
        elif ready[frm[i]] <= d:
            ride_prev[i] = -1
        else:
            continue
        trip_last[t_idx] = i
        a = arr[i]
        if a > limit:
            continue
        s = to[i]
        if a < arrival[s]:
            arrival[s] = a
            pred_a[s] = i
            relax(s)
        if a + slack < ready[s]:
            ready[s] = a + slack
            pred_r[s] = i
    return ArrivalState(q.depart, q.horizon, arrival, ready, pred_a, pred_r, ride_prev)


def journey_tree(state: ArrivalState, tt: Timetable, origin: int | None = None,
                 targets: Iterable[int] | None = None) -> JourneyTree:
    """Connections on the earliest-arrival paths to every reached stop, each once.

    ``targets`` (stop indices) restricts the tree to the paths ending there.
    """
    sa = tt.scan_arrays
    frm = sa.frm
    used: set[int] = set()
    done: set[tuple[int, int]] = set()  # (label kind, stop); 0 = arrival, 1 = ready

    starts = state.reached() if targets is None else sorted(set(targets))
    for start in starts:
        kind, s = 0, start
        path: set[tuple[int, int]] = set()
        while True:
            key = (kind, s)
            if key in done:
                if key in path:
                    raise AssertionError("cyclic predecessor chain")
                break
            done.add(key)
            path.add(key)
            p = state.pred_arrival[s] if kind == 0 else state.pred_ready[s]
            if p == ORIGIN:
                break
            if p <= FOOT_BASE:
                kind, s = 0, FOOT_BASE - p
                continue
            c = p
            while True:
                used.add(c)
                prev = state.ride_prev[c]
                if prev < 0:
                    break
                c = prev
            kind, s = 1, frm[c]

    order = tuple(sorted(used))
    conns = tt.connections
    return JourneyTree(
        origin,
        order,
        tuple(conns[i].line for i in order),
        tuple(conns[i].length_m for i in order),
        state.arrival_by_stop(tt),
    )
