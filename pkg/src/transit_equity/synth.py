"""Deterministic synthetic cities: GTFS feed plus population cells.

A city has a dense centre and sparse suburbs. Radial bus lines run from the
suburbs to the centre, circulators loop around the centre, an optional fast
rail line (the *suburban connector*) links the outer ring to the centre, and
an optional *null line* runs far away from any resident.
"""

from __future__ import annotations

import datetime as dt
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .errors import InvalidInputError
from .geodata import GeoPoint, great_circle_m, unproject
from .gtfs import CalendarEntry, Feed, Route, Stop, StopTime, Trip

ROLE_CONNECTOR = "suburban_connector"
ROLE_CIRCULATOR = "center_circulator"
ROLE_NULL = "null_line"


@dataclass
class SynthSpec:
    center_lat: float = 45.07
    center_lon: float = 7.68
    radius_km: float = 8.0
    rings: int = 4  # circulator rings between ring_inner_km and ring_outer_km
    ring_inner_km: float = 1.0
    ring_outer_km: float = 3.0
    radial_lines: int = 25
    circulator_lines: int = 4
    suburban_connector: bool = True
    null_line: bool = False
    radial_reach: tuple[float, float] = (0.7, 1.1)  # outer terminus as a fraction of radius_km
    radial_headways_s: tuple[int, ...] = (600, 900, 1200)
    circulator_headway_s: int = 600
    connector_headway_s: int = 900
    bus_spacing_m: float = 500.0
    circulator_spacing_m: float = 400.0
    rail_spacing_m: float = 2000.0
    bus_speed_mps: float = 6.0
    circulator_speed_mps: float = 5.0
    rail_speed_mps: float = 16.0
    dwell_s: int = 20
    window_start_s: int = 6 * 3600 + 1800
    window_end_s: int = 9 * 3600 + 1800
    density_center_per_km2: float = 10_000.0
    density_scale_km: float = 4.0
    density_noise: float = 0.3
    population_extent_km: float = 10.0
    cell_m: float = 500.0
    start_date: str = "20240101"
    end_date: str = "20241231"

    def validate(self) -> None:
        n_lines = self.radial_lines + self.circulator_lines + int(self.suburban_connector) + int(self.null_line)
        if n_lines == 0:
            raise InvalidInputError("synthetic city needs at least one line")
        if self.radial_lines < 0 or self.circulator_lines < 0 or self.rings < 0:
            raise InvalidInputError("line and ring counts must be >= 0")
        if self.circulator_lines and self.rings < 1:
            raise InvalidInputError("circulators need at least one ring")
        if min(self.radial_headways_s, default=1) <= 0 or self.circulator_headway_s <= 0 or self.connector_headway_s <= 0:
            raise InvalidInputError("headways must be positive")
        if min(self.bus_speed_mps, self.circulator_speed_mps, self.rail_speed_mps) <= 0:
            raise InvalidInputError("speeds must be positive")
        if min(self.bus_spacing_m, self.circulator_spacing_m, self.rail_spacing_m, self.cell_m) <= 0:
            raise InvalidInputError("spacings must be positive")
        if self.window_end_s <= self.window_start_s:
            raise InvalidInputError("empty service window")
        if self.radius_km <= 0 or self.ring_outer_km < self.ring_inner_km:
            raise InvalidInputError("inconsistent geometry")

    @classmethod
    def from_dict(cls, data: dict) -> "SynthSpec":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InvalidInputError(f"unknown synthetic-city keys: {sorted(unknown)}")
        data = dict(data)
        if "radial_reach" in data:
            data["radial_reach"] = tuple(float(v) for v in data["radial_reach"])
        if "radial_headways_s" in data:
            data["radial_headways_s"] = tuple(int(h) for h in data["radial_headways_s"])
        spec = cls(**data)
        spec.validate()
        return spec

    @classmethod
    def load(cls, path: str | Path) -> "SynthSpec":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except (OSError, json.JSONDecodeError, TypeError) as exc:
            raise InvalidInputError(f"cannot read synthetic spec {path}: {exc}") from None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["radial_headways_s"] = list(self.radial_headways_s)
        d["radial_reach"] = list(self.radial_reach)
        return d


@dataclass
class SynthCity:
    feed: Feed
    population: list[tuple[GeoPoint, int]]
    roles: dict[str, str] = field(default_factory=dict)
    bbox: tuple[GeoPoint, GeoPoint] | None = None


class _Builder:
    def __init__(self, spec: SynthSpec, rng: np.random.Generator):
        self.spec = spec
        self.rng = rng
        self.origin = GeoPoint(spec.center_lat, spec.center_lon)
        self.stops: dict[str, Stop] = {}
        self.routes: dict[str, Route] = {}
        self.trips: dict[str, Trip] = {}
        self.stop_times: dict[str, list[StopTime]] = {}

    def point(self, x: float, y: float) -> GeoPoint:
        p = unproject(self.origin, x, y)
        return GeoPoint(round(p.lat, 7), round(p.lon, 7))

    def add_line(self, line_id: str, name: str, route_type: int, xy: list[tuple[float, float]],
                 speed: float, headway: int, offset: int, loop: bool = False) -> None:
        spec = self.spec
        self.routes[line_id] = Route(line_id, name, f"{name} synthetic", route_type)
        ids = []
        for k, (x, y) in enumerate(xy):
            sid = f"{line_id}_{k:02d}"
            self.stops[sid] = Stop(sid, f"{name} stop {k}", self.point(x, y))
            ids.append(sid)
        forward = ids + ([ids[0]] if loop else [])
        for direction, seq in ((0, forward), (1, forward[::-1])):
            starts = range(spec.window_start_s + offset, spec.window_end_s + offset, headway)
            for j, t0 in enumerate(starts):
                tid = f"{line_id}_d{direction}_{j:03d}"
                self.trips[tid] = Trip(tid, line_id, "WK")
                sts, t, dist = [], float(t0), 0.0
                for k, sid in enumerate(seq):
                    if k > 0:
                        hop = great_circle_m(self.stops[seq[k - 1]].location, self.stops[sid].location)
                        dist += hop
                        t += hop / speed
                    arr = int(round(t))
                    dep = arr + (spec.dwell_s if 0 < k < len(seq) - 1 else 0)
                    sts.append(StopTime(sid, k + 1, arr, dep, round(dist, 1)))
                    t = float(dep)
                self.stop_times[tid] = sts


def _segment(r0: float, r1: float, angle: float, spacing: float) -> list[tuple[float, float]]:
    n = max(1, int(round(abs(r1 - r0) / spacing)))
    return [((r0 + (r1 - r0) * k / n) * math.cos(angle), (r0 + (r1 - r0) * k / n) * math.sin(angle))
            for k in range(n + 1)]


def synthesize_network(spec: SynthSpec, seed: int) -> SynthCity:
    """Build the synthetic city for ``(spec, seed)``; equal inputs give equal outputs."""
    spec.validate()
    rng = np.random.default_rng(seed)
    b = _Builder(spec, rng)
    roles: dict[str, str] = {}
    R = spec.radius_km * 1000.0

    for k in range(spec.radial_lines):
        angle = 2 * math.pi * k / spec.radial_lines + rng.uniform(-0.15, 0.15)
        outer = R * rng.uniform(*spec.radial_reach)
        xy = _segment(outer, 300.0, angle, spec.bus_spacing_m)
        headway = int(rng.choice(spec.radial_headways_s))
        b.add_line(f"R{k + 1:02d}", f"{k + 1}", 3, xy, spec.bus_speed_mps, headway, int(rng.integers(0, headway)))

    for k in range(spec.circulator_lines):
        ring = k % spec.rings
        frac = ring / (spec.rings - 1) if spec.rings > 1 else 0.0
        radius = 1000.0 * (spec.ring_inner_km + frac * (spec.ring_outer_km - spec.ring_inner_km))
        radius *= rng.uniform(0.9, 1.1)
        n = max(3, int(round(2 * math.pi * radius / spec.circulator_spacing_m)))
        phase = rng.uniform(0, 2 * math.pi)
        xy = [(radius * math.cos(phase + 2 * math.pi * j / n), radius * math.sin(phase + 2 * math.pi * j / n))
              for j in range(n)]
        lid = f"C{k + 1}"
        b.add_line(lid, f"Circle {k + 1}", 0, xy, spec.circulator_speed_mps, spec.circulator_headway_s,
                   int(rng.integers(0, spec.circulator_headway_s)), loop=True)
        if k == 0:
            roles[lid] = ROLE_CIRCULATOR

    if spec.suburban_connector:
        angle = rng.uniform(0, 2 * math.pi)
        xy = _segment(R * 1.25, 0.0, angle, spec.rail_spacing_m)
        b.add_line("S1", "S1", 2, xy, spec.rail_speed_mps, spec.connector_headway_s,
                   int(rng.integers(0, spec.connector_headway_s)))
        roles["S1"] = ROLE_CONNECTOR

    if spec.null_line:
        far = 1000.0 * (spec.population_extent_km + 40.0)
        xy = [(far + 800.0 * j, 0.0) for j in range(6)]
        b.add_line("X1", "X1", 3, xy, spec.bus_speed_mps, 900, 0)
        roles["X1"] = ROLE_NULL

    start = dt.datetime.strptime(spec.start_date, "%Y%m%d").date()
    end = dt.datetime.strptime(spec.end_date, "%Y%m%d").date()
    calendar = {"WK": CalendarEntry("WK", (True,) * 5 + (False, False), start, end)}
    feed = Feed(b.stops, b.routes, b.trips, b.stop_times, calendar)

    population = []
    extent = spec.population_extent_km * 1000.0
    n = int(extent // spec.cell_m)
    for i in range(-n, n + 1):
        for j in range(-n, n + 1):
            x, y = i * spec.cell_m, j * spec.cell_m
            r = math.hypot(x, y)
            if r > extent:
                continue
            density = spec.density_center_per_km2 * math.exp(-r / 1000.0 / spec.density_scale_km)
            density *= math.exp(spec.density_noise * rng.standard_normal())
            count = int(round(density * (spec.cell_m / 1000.0) ** 2))
            if count > 0:
                population.append((b.point(x, y), count))

    lat_pad = (extent + 1000.0) / 111_195.0
    lon_pad = lat_pad / math.cos(math.radians(spec.center_lat))
    bbox = (GeoPoint(spec.center_lat - lat_pad, spec.center_lon - lon_pad),
            GeoPoint(spec.center_lat + lat_pad, spec.center_lon + lon_pad))
    return SynthCity(feed, population, roles, bbox)
