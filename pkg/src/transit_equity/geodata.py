"""Hexagonal tessellation, population attachment and geodesic primitives.

The lattice is laid out in a spherical azimuthal equidistant projection
centred on the grid origin; hexagons are flat-top with circumradius equal to
the side length. Axial coordinates ``(q, r)`` follow the usual convention::

    x = side * 3/2 * q
    y = side * sqrt(3) * (r + q/2)
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, replace
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

from .errors import InvalidInputError

log = logging.getLogger(__name__)

EARTH_RADIUS_M = 6_371_000.0
SQRT3 = math.sqrt(3.0)


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float

    def __post_init__(self):
        if not (-90.0 <= self.lat <= 90.0) or not (-180.0 <= self.lon <= 180.0):
            raise InvalidInputError(f"coordinates out of range: ({self.lat}, {self.lon})")


@dataclass(frozen=True)
class Hexagon:
    id: int
    center: GeoPoint
    population: int = 0
    q: int = 0
    r: int = 0


def great_circle_m(a: GeoPoint, b: GeoPoint) -> float:
    """Haversine distance in meters."""
    phi1, phi2 = math.radians(a.lat), math.radians(b.lat)
    dphi = phi2 - phi1
    dlam = math.radians(b.lon - a.lon)
    h = math.sin(dphi / 2) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2) ** 2
    return 2.0 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(h)))


def hex_area_km2(side_m: float) -> float:
    return 1.5 * SQRT3 * (side_m / 1000.0) ** 2


# -- projection ------------------------------------------------------------

def project(origin: GeoPoint, p: GeoPoint) -> tuple[float, float]:
    """Forward azimuthal equidistant projection, meters east/north of origin."""
    phi0, lam0 = math.radians(origin.lat), math.radians(origin.lon)
    phi, lam = math.radians(p.lat), math.radians(p.lon)
    dlam = lam - lam0
    # haversine angle keeps precision for short distances
    h = math.sin((phi - phi0) / 2) ** 2 + math.cos(phi0) * math.cos(phi) * math.sin(dlam / 2) ** 2
    c = 2.0 * math.asin(min(1.0, math.sqrt(h)))
    if c == 0.0:
        return 0.0, 0.0
    az = math.atan2(math.sin(dlam) * math.cos(phi),
                    math.cos(phi0) * math.sin(phi) - math.sin(phi0) * math.cos(phi) * math.cos(dlam))
    return EARTH_RADIUS_M * c * math.sin(az), EARTH_RADIUS_M * c * math.cos(az)


def unproject(origin: GeoPoint, x: float, y: float) -> GeoPoint:
    phi0, lam0 = math.radians(origin.lat), math.radians(origin.lon)
    rho = math.hypot(x, y)
    if rho == 0.0:
        return origin
    c = rho / EARTH_RADIUS_M
    sin_c, cos_c = math.sin(c), math.cos(c)
    phi = math.asin(max(-1.0, min(1.0, cos_c * math.sin(phi0) + y * sin_c * math.cos(phi0) / rho)))
    lam = lam0 + math.atan2(x * sin_c, rho * math.cos(phi0) * cos_c - y * math.sin(phi0) * sin_c)
    lon = (math.degrees(lam) + 180.0) % 360.0 - 180.0
    return GeoPoint(math.degrees(phi), lon)


# -- lattice ---------------------------------------------------------------

def axial_to_xy(q: int, r: int, side_m: float) -> tuple[float, float]:
    return side_m * 1.5 * q, side_m * SQRT3 * (r + q / 2.0)


def xy_to_axial(x: float, y: float, side_m: float) -> tuple[int, int]:
    """Nearest lattice cell via cube rounding."""
    qf = (2.0 / 3.0) * x / side_m
    rf = (-x / 3.0 + SQRT3 / 3.0 * y) / side_m
    sf = -qf - rf
    q, r, s = round(qf), round(rf), round(sf)
    dq, dr, ds = abs(q - qf), abs(r - rf), abs(s - sf)
    if dq > dr and dq > ds:
        q = -r - s
    elif dr > ds:
        r = -q - s
    return int(q), int(r)


def hex_vertices_xy(q: int, r: int, side_m: float) -> list[tuple[float, float]]:
    """Counter-clockwise corner list, starting east."""
    cx, cy = axial_to_xy(q, r, side_m)
    return [
        (cx + side_m * math.cos(math.radians(60 * k)), cy + side_m * math.sin(math.radians(60 * k)))
        for k in range(6)
    ]


@dataclass(frozen=True)
class HexGrid:
    hexagons: tuple[Hexagon, ...]
    side_m: float
    origin: GeoPoint
    orientation: str = "flat-top"
    dropped_cells: int = 0
    dropped_population: int = 0

    @cached_property
    def _by_id(self) -> dict[int, Hexagon]:
        return {h.id: h for h in self.hexagons}

    @cached_property
    def _by_axial(self) -> dict[tuple[int, int], int]:
        return {(h.q, h.r): h.id for h in self.hexagons}

    def __len__(self) -> int:
        return len(self.hexagons)

    def __getitem__(self, hex_id: int) -> Hexagon:
        try:
            return self._by_id[hex_id]
        except KeyError:
            raise InvalidInputError(f"unknown hexagon id {hex_id}") from None

    def __contains__(self, hex_id: object) -> bool:
        return hex_id in self._by_id

    @property
    def ids(self) -> list[int]:
        return [h.id for h in self.hexagons]

    @property
    def total_population(self) -> int:
        return sum(h.population for h in self.hexagons)

    @property
    def area_km2(self) -> float:
        return hex_area_km2(self.side_m)

    def polygon(self, hex_id: int) -> list[tuple[float, float]]:
        """Closed lon/lat ring, counter-clockwise."""
        h = self[hex_id]
        ring = [unproject(self.origin, x, y) for x, y in hex_vertices_xy(h.q, h.r, self.side_m)]
        coords = [(p.lon, p.lat) for p in ring]
        return coords + [coords[0]]


def build_grid(bbox: tuple[GeoPoint, GeoPoint], side_m: float = 1000.0) -> HexGrid:
    sw, ne = bbox
    if side_m <= 0:
        raise InvalidInputError("side_m must be positive")
    if not (ne.lat > sw.lat and ne.lon > sw.lon):
        raise InvalidInputError("bbox must be (south-west, north-east) with non-zero area")
    origin = GeoPoint((sw.lat + ne.lat) / 2.0, (sw.lon + ne.lon) / 2.0)

    # projected extent of the bbox outline, sampled densely enough for city scales
    xs, ys = [], []
    for k in range(21):
        t = k / 20.0
        lat = sw.lat + t * (ne.lat - sw.lat)
        lon = sw.lon + t * (ne.lon - sw.lon)
        for p in (GeoPoint(lat, sw.lon), GeoPoint(lat, ne.lon), GeoPoint(sw.lat, lon), GeoPoint(ne.lat, lon)):
            x, y = project(origin, p)
            xs.append(x)
            ys.append(y)
    pad = 2.0 * side_m
    q_lo = math.floor((min(xs) - pad) / (1.5 * side_m))
    q_hi = math.ceil((max(xs) + pad) / (1.5 * side_m))

    hexagons = []
    for q in range(q_lo, q_hi + 1):
        r_lo = math.floor((min(ys) - pad) / (SQRT3 * side_m) - q / 2.0)
        r_hi = math.ceil((max(ys) + pad) / (SQRT3 * side_m) - q / 2.0)
        for r in range(r_lo, r_hi + 1):
            x, y = axial_to_xy(q, r, side_m)
            c = unproject(origin, x, y)
            if sw.lat <= c.lat <= ne.lat and sw.lon <= c.lon <= ne.lon:
                hexagons.append(Hexagon(len(hexagons), c, 0, q, r))
    return HexGrid(tuple(hexagons), float(side_m), origin)


def locate(grid: HexGrid, p: GeoPoint) -> int | None:
    x, y = project(grid.origin, p)
    return grid._by_axial.get(xy_to_axial(x, y, grid.side_m))


def assign_population(grid: HexGrid, cells: Iterable[tuple[GeoPoint, int]]) -> HexGrid:
    """Add each cell's count to the hexagon containing its point.

    Cells outside the grid are tallied in ``dropped_cells``/``dropped_population``.
    """
    add: dict[int, int] = {}
    dropped_cells = dropped_pop = 0
    for point, count in cells:
        if count < 0:
            raise InvalidInputError(f"negative population {count} at {point}")
        hid = locate(grid, point)
        if hid is None:
            dropped_cells += 1
            dropped_pop += count
            continue
        add[hid] = add.get(hid, 0) + count
    if dropped_cells:
        log.warning("%d population cells (%d persons) fall outside the grid", dropped_cells, dropped_pop)
    hexagons = tuple(replace(h, population=h.population + add.get(h.id, 0)) for h in grid.hexagons)
    return replace(
        grid,
        hexagons=hexagons,
        dropped_cells=grid.dropped_cells + dropped_cells,
        dropped_population=grid.dropped_population + dropped_pop,
    )


def filter_low_density(grid: HexGrid, min_density: float) -> HexGrid:
    """Keep hexagons with population / area_km2 >= min_density."""
    if min_density < 0:
        raise InvalidInputError("min_density must be >= 0")
    area = grid.area_km2
    kept = tuple(h for h in grid.hexagons if h.population / area >= min_density)
    return replace(grid, hexagons=kept)


def read_population_csv(path: str | Path) -> list[tuple[GeoPoint, int]]:
    path = Path(path)
    cells = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = {"lat", "lon", "population"} - set(reader.fieldnames or ())
        if missing:
            raise InvalidInputError(f"{path}: missing columns {sorted(missing)}")
        for lineno, row in enumerate(reader, start=2):
            try:
                point = GeoPoint(float(row["lat"]), float(row["lon"]))
                count = int(round(float(row["population"])))
            except (TypeError, ValueError) as exc:
                raise InvalidInputError(f"{path}:{lineno}: {exc}") from None
            if count < 0:
                raise InvalidInputError(f"{path}:{lineno}: negative population")
            cells.append((point, count))
    return cells


def write_population_csv(path: str | Path, cells: Sequence[tuple[GeoPoint, int]]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["lat", "lon", "population"])
        for p, n in cells:
            w.writerow([f"{p.lat:.6f}", f"{p.lon:.6f}", n])


def grid_geojson(grid: HexGrid, properties: dict[int, dict] | None = None) -> dict:
    """FeatureCollection of hexagon polygons with ``id`` and ``population``."""
    features = []
    for h in grid.hexagons:
        props = {"id": h.id, "population": h.population}
        if properties and h.id in properties:
            props.update(properties[h.id])
        features.append({
            "type": "Feature",
            "geometry": {"type": "Polygon", "coordinates": [[list(c) for c in grid.polygon(h.id)]]},
            "properties": props,
        })
    return {"type": "FeatureCollection", "features": features}
