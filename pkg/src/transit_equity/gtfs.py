"""GTFS ingestion and expansion of one service day into a connection timetable."""

from __future__ import annotations

import csv
import datetime as dt
import logging
import math
import re
from bisect import bisect_left
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import GTFSError, InvalidInputError
from .geodata import EARTH_RADIUS_M, GeoPoint, great_circle_m

log = logging.getLogger(__name__)

REQUIRED_FILES = ("stops.txt", "routes.txt", "trips.txt", "stop_times.txt")

MODES = ("tram", "metro", "rail", "bus", "ferry", "other")
_BASIC_ROUTE_TYPES = {0: "tram", 1: "metro", 2: "rail", 3: "bus", 4: "ferry"}
_EXTENDED_ROUTE_TYPES = [  # (lo, hi, mode) for the extended route_type ranges
    (100, 199, "rail"), (200, 299, "bus"), (400, 499, "metro"), (700, 799, "bus"),
    (900, 999, "tram"), (1000, 1099, "ferry"), (1200, 1299, "ferry"),
]

_TIME_RE = re.compile(r"^\s*(\d{1,3}):([0-5]\d):([0-5]\d)\s*$")


def parse_time(value: str) -> int:
    """``H:MM:SS`` / ``HH:MM:SS`` to seconds after midnight; hours may exceed 23."""
    m = _TIME_RE.match(value)
    if not m:
        raise ValueError(f"malformed time {value!r}")
    h, mi, s = (int(g) for g in m.groups())
    return h * 3600 + mi * 60 + s


def format_time(seconds: float) -> str:
    s = int(round(seconds))
    return f"{s // 3600:02d}:{s % 3600 // 60:02d}:{s % 60:02d}"


def route_mode(route_type: int) -> str:
    if route_type in _BASIC_ROUTE_TYPES:
        return _BASIC_ROUTE_TYPES[route_type]
    for lo, hi, mode in _EXTENDED_ROUTE_TYPES:
        if lo <= route_type <= hi:
            return mode
    return "other"


# -- feed --------------------------------------------------------------------

@dataclass(frozen=True)
class Stop:
    id: str
    name: str
    location: GeoPoint


@dataclass(frozen=True)
class Line:
    id: str
    mode: str
    name: str


@dataclass(frozen=True)
class Route:
    id: str
    short_name: str
    long_name: str
    route_type: int

    @property
    def mode(self) -> str:
        return route_mode(self.route_type)


@dataclass(frozen=True)
class Trip:
    id: str
    route_id: str
    service_id: str


@dataclass(frozen=True)
class StopTime:
    stop_id: str
    seq: int
    arrival: int | None
    departure: int | None
    shape_dist: float | None = None


@dataclass(frozen=True)
class CalendarEntry:
    service_id: str
    weekdays: tuple[bool, ...]  # monday first
    start: dt.date
    end: dt.date


@dataclass(frozen=True)
class Frequency:
    start: int
    end: int
    headway: int
    exact_times: int = 0


@dataclass
class Feed:
    stops: dict[str, Stop]
    routes: dict[str, Route]
    trips: dict[str, Trip]
    stop_times: dict[str, list[StopTime]]
    calendar: dict[str, CalendarEntry] = field(default_factory=dict)
    calendar_dates: list[tuple[str, dt.date, int]] = field(default_factory=list)
    transfers: list[tuple[str, str, int]] = field(default_factory=list)
    frequencies: dict[str, list[Frequency]] = field(default_factory=dict)

    def lines(self, grouping: str = "route_id") -> dict[str, Line]:
        out: dict[str, Line] = {}
        for route in self.routes.values():
            lid = line_id_for(route, grouping)
            if lid not in out:
                out[lid] = Line(lid, route.mode, route.short_name or route.long_name or route.id)
        return out


def line_id_for(route: Route, grouping: str) -> str:
    if grouping == "route_id":
        return route.id
    if grouping == "route_short_name":
        return route.short_name or route.id
    raise InvalidInputError(f"unknown line_grouping {grouping!r}")


def _read_csv(path: Path) -> Iterable[tuple[int, dict[str, str]]]:
    with path.open(newline="", encoding="utf-8-sig") as fh:
        reader = csv.DictReader(fh)
        for lineno, row in enumerate(reader, start=2):
            yield lineno, {k.strip(): (v or "").strip() for k, v in row.items() if k is not None}


def _need(row: dict[str, str], key: str, fname: str, lineno: int) -> str:
    value = row.get(key, "")
    if value == "":
        raise GTFSError(f"missing value for {key!r}", fname, lineno)
    return value


def _parse_date(value: str, fname: str, lineno: int) -> dt.date:
    try:
        return dt.datetime.strptime(value, "%Y%m%d").date()
    except ValueError:
        raise GTFSError(f"malformed date {value!r}", fname, lineno) from None


def parse_feed(path: str | Path) -> Feed:
    path = Path(path)
    if not path.is_dir():
        raise GTFSError(f"not a directory: {path}")
    for name in REQUIRED_FILES:
        if not (path / name).is_file():
            raise GTFSError("required file missing", name)
    if not (path / "calendar.txt").is_file() and not (path / "calendar_dates.txt").is_file():
        raise GTFSError("required file missing (need calendar.txt and/or calendar_dates.txt)", "calendar.txt")

    stops: dict[str, Stop] = {}
    for lineno, row in _read_csv(path / "stops.txt"):
        sid = _need(row, "stop_id", "stops.txt", lineno)
        try:
            loc = GeoPoint(float(_need(row, "stop_lat", "stops.txt", lineno)),
                           float(_need(row, "stop_lon", "stops.txt", lineno)))
        except ValueError as exc:
            raise GTFSError(str(exc), "stops.txt", lineno) from None
        stops[sid] = Stop(sid, row.get("stop_name", ""), loc)

    routes: dict[str, Route] = {}
    for lineno, row in _read_csv(path / "routes.txt"):
        rid = _need(row, "route_id", "routes.txt", lineno)
        try:
            rtype = int(row.get("route_type") or 3)
        except ValueError:
            raise GTFSError(f"malformed route_type {row.get('route_type')!r}", "routes.txt", lineno) from None
        routes[rid] = Route(rid, row.get("route_short_name", ""), row.get("route_long_name", ""), rtype)

    trips: dict[str, Trip] = {}
    for lineno, row in _read_csv(path / "trips.txt"):
        tid = _need(row, "trip_id", "trips.txt", lineno)
        rid = _need(row, "route_id", "trips.txt", lineno)
        if rid not in routes:
            raise GTFSError(f"trip {tid!r} references unknown route {rid!r}", "trips.txt", lineno)
        trips[tid] = Trip(tid, rid, _need(row, "service_id", "trips.txt", lineno))

    stop_times: dict[str, list[StopTime]] = {}
    for lineno, row in _read_csv(path / "stop_times.txt"):
        tid = _need(row, "trip_id", "stop_times.txt", lineno)
        sid = _need(row, "stop_id", "stop_times.txt", lineno)
        if tid not in trips:
            raise GTFSError(f"unknown trip {tid!r}", "stop_times.txt", lineno)
        if sid not in stops:
            raise GTFSError(f"unknown stop {sid!r}", "stop_times.txt", lineno)
        try:
            seq = int(_need(row, "stop_sequence", "stop_times.txt", lineno))
            arr = parse_time(row["arrival_time"]) if row.get("arrival_time") else None
            dep = parse_time(row["departure_time"]) if row.get("departure_time") else None
            sd = float(row["shape_dist_traveled"]) if row.get("shape_dist_traveled") else None
        except ValueError as exc:
            raise GTFSError(str(exc), "stop_times.txt", lineno) from None
        stop_times.setdefault(tid, []).append(StopTime(sid, seq, arr, dep, sd))
    for seq_list in stop_times.values():
        seq_list.sort(key=lambda st: st.seq)

    calendar: dict[str, CalendarEntry] = {}
    if (path / "calendar.txt").is_file():
        days = ("monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday")
        for lineno, row in _read_csv(path / "calendar.txt"):
            sid = _need(row, "service_id", "calendar.txt", lineno)
            flags = tuple(row.get(d, "0") == "1" for d in days)
            calendar[sid] = CalendarEntry(
                sid, flags,
                _parse_date(_need(row, "start_date", "calendar.txt", lineno), "calendar.txt", lineno),
                _parse_date(_need(row, "end_date", "calendar.txt", lineno), "calendar.txt", lineno),
            )

    calendar_dates: list[tuple[str, dt.date, int]] = []
    if (path / "calendar_dates.txt").is_file():
        for lineno, row in _read_csv(path / "calendar_dates.txt"):
            sid = _need(row, "service_id", "calendar_dates.txt", lineno)
            day = _parse_date(_need(row, "date", "calendar_dates.txt", lineno), "calendar_dates.txt", lineno)
            kind = _need(row, "exception_type", "calendar_dates.txt", lineno)
            if kind not in ("1", "2"):
                raise GTFSError(f"bad exception_type {kind!r}", "calendar_dates.txt", lineno)
            calendar_dates.append((sid, day, int(kind)))

    transfers: list[tuple[str, str, int]] = []
    if (path / "transfers.txt").is_file():
        for lineno, row in _read_csv(path / "transfers.txt"):
            a, b = row.get("from_stop_id", ""), row.get("to_stop_id", "")
            if not a or not b or not row.get("min_transfer_time"):
                continue
            if a not in stops or b not in stops:
                raise GTFSError(f"transfer references unknown stop {a!r}/{b!r}", "transfers.txt", lineno)
            try:
                transfers.append((a, b, int(float(row["min_transfer_time"]))))
            except ValueError:
                raise GTFSError("malformed min_transfer_time", "transfers.txt", lineno) from None

    frequencies: dict[str, list[Frequency]] = {}
    if (path / "frequencies.txt").is_file():
        for lineno, row in _read_csv(path / "frequencies.txt"):
            tid = _need(row, "trip_id", "frequencies.txt", lineno)
            if tid not in trips:
                raise GTFSError(f"unknown trip {tid!r}", "frequencies.txt", lineno)
            try:
                freq = Frequency(
                    parse_time(_need(row, "start_time", "frequencies.txt", lineno)),
                    parse_time(_need(row, "end_time", "frequencies.txt", lineno)),
                    int(_need(row, "headway_secs", "frequencies.txt", lineno)),
                    int(row.get("exact_times") or 0),
                )
            except ValueError as exc:
                raise GTFSError(str(exc), "frequencies.txt", lineno) from None
            if freq.headway <= 0:
                raise GTFSError("headway_secs must be positive", "frequencies.txt", lineno)
            frequencies.setdefault(tid, []).append(freq)

    return Feed(stops, routes, trips, stop_times, calendar, calendar_dates, transfers, frequencies)


def write_feed(feed: Feed, path: str | Path, feed_start: dt.date | None = None) -> None:
    """Write the feed as GTFS CSVs; output bytes depend only on the feed content."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)

    def dump(name: str, header: Sequence[str], rows: Iterable[Sequence]) -> None:
        with (path / name).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)

    dump("agency.txt", ["agency_id", "agency_name", "agency_url", "agency_timezone"],
         [["synth", "Synthetic Transit", "https://example.org", "Europe/Rome"]])
    dump("stops.txt", ["stop_id", "stop_name", "stop_lat", "stop_lon"],
         [[s.id, s.name, f"{s.location.lat:.7f}", f"{s.location.lon:.7f}"] for s in feed.stops.values()])
    dump("routes.txt", ["route_id", "agency_id", "route_short_name", "route_long_name", "route_type"],
         [[r.id, "synth", r.short_name, r.long_name, r.route_type] for r in feed.routes.values()])
    dump("trips.txt", ["route_id", "service_id", "trip_id"],
         [[t.route_id, t.service_id, t.id] for t in feed.trips.values()])

    def st_rows():
        for tid, sts in feed.stop_times.items():
            for st in sts:
                yield [tid,
                       format_time(st.arrival) if st.arrival is not None else "",
                       format_time(st.departure) if st.departure is not None else "",
                       st.stop_id, st.seq,
                       f"{st.shape_dist:.1f}" if st.shape_dist is not None else ""]

    dump("stop_times.txt",
         ["trip_id", "arrival_time", "departure_time", "stop_id", "stop_sequence", "shape_dist_traveled"],
         st_rows())
    if feed.calendar:
        dump("calendar.txt",
             ["service_id", "monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday",
              "start_date", "end_date"],
             [[c.service_id, *(int(f) for f in c.weekdays), c.start.strftime("%Y%m%d"), c.end.strftime("%Y%m%d")]
              for c in feed.calendar.values()])
    if feed.calendar_dates or not feed.calendar:
        dump("calendar_dates.txt", ["service_id", "date", "exception_type"],
             [[s, d.strftime("%Y%m%d"), k] for s, d, k in feed.calendar_dates])
    if feed.transfers:
        dump("transfers.txt", ["from_stop_id", "to_stop_id", "transfer_type", "min_transfer_time"],
             [[a, b, 2, t] for a, b, t in feed.transfers])
    if feed.frequencies:
        dump("frequencies.txt", ["trip_id", "start_time", "end_time", "headway_secs", "exact_times"],
             [[tid, format_time(f.start), format_time(f.end), f.headway, f.exact_times]
              for tid, fs in feed.frequencies.items() for f in fs])


# -- service calendar ----------------------------------------------------------

def active_services(feed: Feed, day: dt.date) -> set[str]:
    active = {
        c.service_id for c in feed.calendar.values()
        if c.start <= day <= c.end and c.weekdays[day.weekday()]
    }
    for sid, d, kind in feed.calendar_dates:
        if d != day:
            continue
        if kind == 1:
            active.add(sid)
        else:
            active.discard(sid)
    return active


def default_service_date(feed: Feed) -> dt.date:
    """First Wednesday covered by the calendars with at least one active service."""
    starts = [c.start for c in feed.calendar.values()] + [d for _, d, k in feed.calendar_dates if k == 1]
    ends = [c.end for c in feed.calendar.values()] + [d for _, d, k in feed.calendar_dates if k == 1]
    if not starts:
        raise InvalidInputError("feed has no calendar information")
    first, last = min(starts), max(ends)
    day = first + dt.timedelta(days=(2 - first.weekday()) % 7)
    while day <= last:
        if active_services(feed, day):
            return day
        day += dt.timedelta(days=7)
    return first + dt.timedelta(days=(2 - first.weekday()) % 7)


# -- timetable -----------------------------------------------------------------

@dataclass(frozen=True)
class Connection:
    from_stop: str
    to_stop: str
    dep: float
    arr: float
    trip: str
    line: str
    length_m: float
    seq: int = 0

    def sort_key(self):
        return (self.dep, self.arr, self.trip, self.seq)


@dataclass(frozen=True)
class Footpath:
    from_stop: str
    to_stop: str
    duration_s: float


@dataclass(frozen=True, eq=False)
class Timetable:
    stops: tuple[Stop, ...]
    lines: Mapping[str, Line]
    connections: tuple[Connection, ...]
    footpaths: Mapping[str, tuple[Footpath, ...]]
    min_transfer_s: float = 60.0
    service_date: dt.date | None = None
    removed_lines: frozenset[str] = frozenset()

    @cached_property
    def stop_index(self) -> dict[str, int]:
        return {s.id: i for i, s in enumerate(self.stops)}

    @cached_property
    def trip_ids(self) -> list[str]:
        return sorted({c.trip for c in self.connections})

    @cached_property
    def scan_arrays(self) -> "ScanArrays":
        return ScanArrays.build(self)

    @property
    def tag(self) -> str:
        if not self.removed_lines:
            return "all"
        return "minus:" + ",".join(sorted(self.removed_lines))

    def connections_of(self, line: str) -> list[Connection]:
        return [c for c in self.connections if c.line == line]


@dataclass(frozen=True)
class ScanArrays:
    """Flat lists used by the scan loop (plain lists index faster than numpy scalars)."""

    dep: list[float]
    arr: list[float]
    frm: list[int]
    to: list[int]
    trip: list[int]
    footpaths: list[list[tuple[int, float]]]
    n_trips: int

    @classmethod
    def build(cls, tt: Timetable) -> "ScanArrays":
        sidx = tt.stop_index
        tidx = {t: i for i, t in enumerate(tt.trip_ids)}
        cs = tt.connections
        fps: list[list[tuple[int, float]]] = [[] for _ in tt.stops]
        for sid, paths in tt.footpaths.items():
            fps[sidx[sid]] = [(sidx[f.to_stop], f.duration_s) for f in paths]
        return cls(
            dep=[c.dep for c in cs],
            arr=[c.arr for c in cs],
            frm=[sidx[c.from_stop] for c in cs],
            to=[sidx[c.to_stop] for c in cs],
            trip=[tidx[c.trip] for c in cs],
            footpaths=fps,
            n_trips=len(tidx),
        )

    def first_departing_at(self, t: float) -> int:
        return bisect_left(self.dep, t)


def _fill_times(sts: list[StopTime]) -> list[tuple[float, float]]:
    """(arrival, departure) per stop time, interpolating untimed stops linearly by index."""
    raw = []
    for st in sts:
        a = st.arrival if st.arrival is not None else st.departure
        d = st.departure if st.departure is not None else st.arrival
        raw.append((a, d))
    known = [i for i, (a, _) in enumerate(raw) if a is not None]
    if not known:
        return []
    out = []
    for i, (a, d) in enumerate(raw):
        if a is not None:
            out.append((float(a), float(d)))
            continue
        k = bisect_left(known, i)
        if k == 0 or k == len(known):
            return []  # untimed first/last stop cannot be placed
        i0, i1 = known[k - 1], known[k]
        t0, t1 = raw[i0][1], raw[i1][0]
        t = t0 + (t1 - t0) * (i - i0) / (i1 - i0)
        out.append((t, t))
    return out


def _hop_length(a: Stop, b: Stop, sd0: float | None, sd1: float | None) -> float:
    gc = great_circle_m(a.location, b.location)
    if sd0 is not None and sd1 is not None:
        delta = sd1 - sd0
        if delta >= 0 and 0.5 * gc <= delta <= 3.0 * gc:
            return float(delta)
    return gc


def expand_trip(feed: Feed, trip: Trip, line: str) -> list[Connection]:
    sts = feed.stop_times.get(trip.id, [])
    times = _fill_times(sts)
    if len(times) < 2:
        return []
    hops = []
    for k in range(len(sts) - 1):
        a, b = sts[k], sts[k + 1]
        if a.stop_id == b.stop_id:
            continue
        length = _hop_length(feed.stops[a.stop_id], feed.stops[b.stop_id], a.shape_dist, b.shape_dist)
        hops.append((a.stop_id, b.stop_id, times[k][1], times[k + 1][0], length, a.seq))

    freqs = feed.frequencies.get(trip.id)
    if not freqs:
        return [Connection(f, t, d, max(a, d), trip.id, line, length, seq) for f, t, d, a, length, seq in hops]

    base = times[0][1]
    out = []
    for freq in freqs:
        for start in range(freq.start, freq.end, freq.headway):
            offset = start - base
            vid = f"{trip.id}@{start}"
            out.extend(
                Connection(f, t, d + offset, max(a, d) + offset, vid, line, length, seq)
                for f, t, d, a, length, seq in hops
            )
    return out


def build_timetable(
    feed: Feed,
    service_date: dt.date | None = None,
    *,
    line_grouping: str = "route_id",
    min_transfer_s: float = 60.0,
    footpath_radius_m: float = 500.0,
    walk_speed_mps: float = 1.39,
    walk_detour: float = 1.3,
) -> Timetable:
    if service_date is None:
        service_date = default_service_date(feed)
    active = active_services(feed, service_date)
    lines = feed.lines(line_grouping)
    conns: list[Connection] = []
    for trip in feed.trips.values():
        if trip.service_id not in active:
            continue
        line = line_id_for(feed.routes[trip.route_id], line_grouping)
        conns.extend(expand_trip(feed, trip, line))
    if not conns:
        log.warning("no active service on %s: timetable is empty", service_date)
    conns.sort(key=Connection.sort_key)
    stops = tuple(feed.stops[s] for s in sorted(feed.stops))
    fps = build_footpaths(
        stops, footpath_radius_m, walk_speed_mps, walk_detour,
        min_transfer_s=min_transfer_s, transfers=feed.transfers,
    )
    return Timetable(stops, dict(sorted(lines.items())), tuple(conns), fps, float(min_transfer_s), service_date)


def build_footpaths(
    stops: Sequence[Stop],
    radius_m: float,
    walk_speed_mps: float,
    detour: float,
    *,
    min_transfer_s: float = 60.0,
    transfers: Sequence[tuple[str, str, int]] = (),
) -> dict[str, tuple[Footpath, ...]]:
    """Symmetric walking transfers between stops within ``radius_m``."""
    if radius_m <= 0 or walk_speed_mps <= 0 or detour < 1:
        raise InvalidInputError("need radius_m > 0, walk_speed_mps > 0, detour >= 1")
    stops = list(stops)
    durations: dict[tuple[str, str], float] = {}
    if len(stops) > 1:
        # chord distance on the unit sphere is monotone in great-circle distance
        lat = np.radians([s.location.lat for s in stops])
        lon = np.radians([s.location.lon for s in stops])
        xyz = np.column_stack([np.cos(lat) * np.cos(lon), np.cos(lat) * np.sin(lon), np.sin(lat)])
        chord = 2.0 * math.sin(min(math.pi, radius_m / EARTH_RADIUS_M) / 2.0) * (1 + 1e-12)
        for i, j in sorted(cKDTree(xyz).query_pairs(chord)):
            a, b = stops[i], stops[j]
            d = great_circle_m(a.location, b.location)
            if d > radius_m:
                continue
            key = (a.id, b.id) if a.id < b.id else (b.id, a.id)
            durations[key] = max(detour * d / walk_speed_mps, float(min_transfer_s))
    for a, b, t in transfers:
        if a == b:
            continue
        key = (a, b) if a < b else (b, a)
        durations[key] = max(durations.get(key, float(min_transfer_s)), float(t))

    out: dict[str, list[Footpath]] = {}
    for (a, b), d in sorted(durations.items()):
        out.setdefault(a, []).append(Footpath(a, b, d))
        out.setdefault(b, []).append(Footpath(b, a, d))
    return {k: tuple(sorted(v, key=lambda f: f.to_stop)) for k, v in sorted(out.items())}


def remove_line(tt: Timetable, line: str) -> Timetable:
    """Copy of ``tt`` without the connections of ``line``."""
    if line not in tt.lines:
        raise InvalidInputError(f"unknown line id {line!r}")
    kept = tuple(c for c in tt.connections if c.line != line)
    return replace(tt, connections=kept, removed_lines=tt.removed_lines | {line})


def timetable_stats(tt: Timetable) -> dict:
    per_line: dict[str, int] = {lid: 0 for lid in tt.lines}
    for c in tt.connections:
        per_line[c.line] += 1
    return {
        "service_date": tt.service_date.isoformat() if tt.service_date else None,
        "stops": len(tt.stops),
        "lines": len(tt.lines),
        "connections": len(tt.connections),
        "trips": len(tt.trip_ids),
        "footpaths": sum(len(v) for v in tt.footpaths.values()),
        "connections_per_line": per_line,
    }
