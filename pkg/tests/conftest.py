import math
import random

import pytest

from transit_equity.geodata import GeoPoint, assign_population, build_grid, filter_low_density
from transit_equity.gtfs import (
    Connection, Footpath, Line, Stop, Timetable, build_footpaths, build_timetable,
)
from transit_equity.synth import SynthSpec, synthesize_network

SMALL_CITY = dict(
    radius_km=4.0, radial_lines=5, circulator_lines=2, rings=1, ring_inner_km=1.0, ring_outer_km=1.0,
    population_extent_km=5.0, density_scale_km=2.0, window_start_s=7 * 3600 + 1800, window_end_s=9 * 3600,
)


def make_timetable(stops, connections, *, slack=60.0, radius=400.0, footpaths=None):
    stops = tuple(sorted(stops, key=lambda s: s.id))
    lines = {c.line: Line(c.line, "bus", c.line) for c in connections}
    if footpaths is None:
        footpaths = build_footpaths(stops, radius, 1.39, 1.3, min_transfer_s=slack)
    return Timetable(stops, dict(sorted(lines.items())), tuple(sorted(connections, key=Connection.sort_key)),
                     footpaths, slack)


def whole_second_footpaths(stops, radius=400.0, slack=60.0):
    """Footpaths with durations rounded up to whole seconds, so time sums are exact in floating point."""
    fps = build_footpaths(stops, radius, 1.39, 1.3, min_transfer_s=slack)
    return {u: [Footpath(f.from_stop, f.to_stop, float(math.ceil(f.duration_s))) for f in lst]
            for u, lst in fps.items()}


def oracle_footpaths(tt):
    return {u: [(f.to_stop, f.duration_s) for f in lst] for u, lst in tt.footpaths.items()}


def random_instance(seed, n_stops=40, n_trips=25, max_conn=300):
    """Random stops in a ~3 km square with random trips; <= max_conn connections.

    Times and footpath durations are whole seconds.
    """
    rng = random.Random(seed)
    stops = [Stop(f"s{i:02d}", f"s{i}", GeoPoint(45.0 + rng.uniform(0, 0.027), 7.0 + rng.uniform(0, 0.038)))
             for i in range(n_stops)]
    conns = []
    for t in range(n_trips):
        k = rng.randint(3, 12)
        seq = rng.sample(range(n_stops), k)
        time = 28_800 + rng.randint(-600, 3000)
        line = f"L{t % 7}"
        for j in range(k - 1):
            run = rng.randint(60, 400)
            conns.append(Connection(f"s{seq[j]:02d}", f"s{seq[j + 1]:02d}", time, time + run,
                                    f"T{t:02d}", line, 100.0 * rng.randint(1, 20), j))
            time += run + rng.choice([0, 0, 30])
            if len(conns) >= max_conn:
                break
        if len(conns) >= max_conn:
            break
    return make_timetable(stops, conns, footpaths=whole_second_footpaths(stops))


@pytest.fixture(scope="session")
def small_city():
    city = synthesize_network(SynthSpec.from_dict(SMALL_CITY), 7)
    tt = build_timetable(city.feed)
    grid = filter_low_density(assign_population(build_grid(city.bbox, 1000.0), city.population), 100.0)
    return city, tt, grid


def designed_city(seed, **overrides):
    """Default synthetic city (30 lines) with its timetable and filtered grid."""
    city = synthesize_network(SynthSpec.from_dict(overrides), seed)
    tt = build_timetable(city.feed)
    grid = filter_low_density(assign_population(build_grid(city.bbox, 1000.0), city.population), 100.0)
    return city, tt, grid


@pytest.fixture(scope="session")
def designed_city_0():
    return designed_city(0)


# -- acceptance summary: one pass/fail line per criterion --------------------

_ACCEPTANCE: dict[str, tuple[str, str]] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        name = report.nodeid.split("::")[-1]
        detail = "; ".join(f"{k}={v}" for k, v in report.user_properties)
        _ACCEPTANCE[name] = ("PASS" if report.outcome == "passed" else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE, key=lambda n: int(n.split("_")[2])):
        status, detail = _ACCEPTANCE[name]
        label = name.replace("test_criterion_", "criterion ").replace("_", " ", 1).replace("_", " ")
        terminalreporter.write_line(f"{status}  {label}" + (f"  [{detail}]" if detail else ""))
