import random
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from transit_equity.accessibility import AccessibilityField, WalkTables, accessibility_field, hex_arrivals
from transit_equity.errors import InvalidInputError
from transit_equity.importance import (
    CumulativeImportance, ImportanceMatrix, compute_fast_scores, cumulative_importance, fast_scores, hex_order,
    importance_matrix, line_importance, percentile_rank,
)
from transit_equity.router import JourneyTree, Query, WalkModel, earliest_arrival, journey_tree
from transit_equity.synth import SynthSpec, synthesize_network
from transit_equity.gtfs import build_timetable

from conftest import SMALL_CITY


def tree(lines, lengths):
    return JourneyTree(0, tuple(range(len(lines))), tuple(lines), tuple(lengths), {})


def test_line_importance_sums():
    assert line_importance(tree([], [])) == {}
    assert line_importance(tree(["X", "X", "X", "Y"], [500.0, 700.0, 800.0, 10.0])) == {"X": 2000.0, "Y": 10.0}


def test_percentile_rank():
    assert percentile_rank(926, 0.65) == 602
    assert percentile_rank(1, 0.65) == 1
    assert percentile_rank(100, 0.65) == 65
    assert percentile_rank(100, 1.0) == 100
    for bad in (0, -0.1, 1.5):
        with pytest.raises(InvalidInputError):
            percentile_rank(10, bad)
    with pytest.raises(InvalidInputError):
        percentile_rank(0, 0.65)


def test_matrix_recomposes_per_hex_trees(small_city):
    _, tt, grid = small_city
    field, matrix = importance_matrix(grid, tt)
    assert field.scores == accessibility_field(grid, tt).scores
    assert field.scans == len(grid)
    tables = WalkTables.build(grid, tt.stops, WalkModel(), 3600)
    nonzero = 0
    for h in grid.hexagons:
        state = earliest_arrival(tt, Query(h.center), tables.access[h.id])
        targets = {s for _, s in hex_arrivals(tables, h.id, state).values() if s >= 0}
        t = journey_tree(state, tt, h.id, targets)
        want = {l: v for l, v in line_importance(t).items() if v > 0}
        assert matrix.entries.get(h.id, {}) == want
        # decomposition: per-line importance adds up to the tree's in-vehicle meters
        assert sum(want.values()) == pytest.approx(sum(t.lengths_m))
        nonzero += bool(want)
    assert nonzero > 0
    assert all(v >= 0 for row in matrix.entries.values() for v in row.values())


def test_empty_timetable_gives_zero_matrix(small_city):
    _, tt, grid = small_city
    empty = replace(tt, connections=())
    field, matrix = importance_matrix(grid, empty)
    assert all(not row for row in matrix.entries.values())
    assert field.scores == accessibility_field(grid, empty).scores


def test_one_line_city():
    spec = SynthSpec.from_dict(dict(SMALL_CITY, radial_lines=1, circulator_lines=0, suburban_connector=False))
    city = synthesize_network(spec, 1)
    tt = build_timetable(city.feed)
    from transit_equity.geodata import assign_population, build_grid, filter_low_density
    grid = filter_low_density(assign_population(build_grid(city.bbox, 1000.0), city.population), 100.0)
    _, matrix = importance_matrix(grid, tt)
    used = {l for row in matrix.entries.values() for l in row}
    assert used == {"R01"}


def random_matrix(rng, n_hex, lines, used):
    entries = {h: {l: float(rng.randint(0, 3) * rng.randint(0, 900)) for l in used} for h in range(n_hex)}
    entries = {h: {l: v for l, v in row.items() if v > 0} for h, row in entries.items()}
    field = AccessibilityField(0, 3600, {h: rng.randint(0, 50) for h in range(n_hex)})
    return ImportanceMatrix(0, tuple(lines), entries), field


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 60))
def test_prefix_matches_naive_resummation(seed, n_hex):
    rng = random.Random(seed)
    lines = ("A", "B", "Z")
    matrix, field = random_matrix(rng, n_hex, lines, used=("A", "B"))
    cum = cumulative_importance(matrix, field)
    order = sorted(field.scores, key=lambda h: (field.scores[h], h))
    assert list(cum.hex_order) == order == hex_order(field)
    for j, l in enumerate(lines):
        for k in range(n_hex):
            assert cum.prefix[k, j] == pytest.approx(sum(matrix.get(h, l) for h in order[:k + 1]))
        assert np.all(np.diff(cum.of(l)) >= 0)
    assert not cum.of("Z").any()
    # percentile monotonicity
    ps = sorted(rng.uniform(0.01, 1) for _ in range(5))
    es = [fast_scores(cum, p).e for p in ps]
    for lo, hi in zip(es, es[1:]):
        assert all(lo[l] <= hi[l] for l in lines)


def test_fast_scores_single_hex_and_errors():
    matrix = ImportanceMatrix(0, ("A",), {7: {"A": 42.0}})
    field = AccessibilityField(0, 3600, {7: 3})
    fs = fast_scores(cumulative_importance(matrix, field))
    assert fs.rank == 1 and fs.hex_id == 7 and fs.e == {"A": 42.0}
    with pytest.raises(InvalidInputError):
        cumulative_importance(ImportanceMatrix(0, ("A",), {8: {"A": 1.0}}), field)
    empty = CumulativeImportance((), ("A",), np.zeros((0, 1)))
    with pytest.raises(InvalidInputError):
        fast_scores(empty)
    with pytest.raises(InvalidInputError):
        fast_scores(cumulative_importance(matrix, field), weighting="people")


def test_population_weighting_picks_mass_percentile():
    matrix = ImportanceMatrix(0, ("A",), {h: {"A": 1.0} for h in range(4)})
    field = AccessibilityField(0, 3600, {0: 1, 1: 2, 2: 3, 3: 4})
    from transit_equity.geodata import GeoPoint, HexGrid, Hexagon
    grid = HexGrid(tuple(Hexagon(h, GeoPoint(45, 7), p) for h, p in enumerate([10, 10, 70, 10])), 1000.0,
                   GeoPoint(45, 7))
    cum = cumulative_importance(matrix, field, grid)
    assert fast_scores(cum, 0.5).rank == 2
    assert fast_scores(cum, 0.5, weighting="population").rank == 3


def test_center_circulator_ignores_worst_hexagons(designed_city_0):
    city, tt, grid = designed_city_0
    circ = next(l for l, role in city.roles.items() if role == "center_circulator")
    fs, field, cum = compute_fast_scores(grid, tt)
    prefix = cum.of(circ)
    n = len(cum.hex_order)
    assert prefix[int(0.4 * n)] == 0  # flat over the worst 40% of hexagons
    assert prefix[-1] > 0
    assert fs.scans == n
