import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from transit_equity.accessibility import AccessibilityField, accessibility_field
from transit_equity.equity import exact_scores, gini, lorenz, weighted_gini, weighted_lorenz
from transit_equity.errors import DegenerateInputError, InvalidInputError
from transit_equity.geodata import GeoPoint, HexGrid, Hexagon
from transit_equity.gtfs import Line

from oracles import brute_gini


def test_gini_examples():
    assert weighted_gini([0, 0, 0, 100], [1, 1, 1, 1]) == 0.75
    assert weighted_gini([1, 2, 3, 4], [1, 1, 1, 1]) == pytest.approx(0.25, abs=1e-15)
    assert weighted_gini([5, 5, 5], [3, 1, 9]) <= 1e-12


def test_lorenz_examples():
    curve = weighted_lorenz([0, 0, 0, 100], [1, 1, 1, 1])
    assert curve.points[0] == (0.0, 0.0) and curve.points[-1] == (1.0, 1.0)
    assert (0.75, 0.0) in curve.points
    uniform = weighted_lorenz([7, 7, 7], [1, 2, 3])
    assert all(y == pytest.approx(x, abs=1e-15) for x, y in uniform.points)


def test_degenerate_inputs():
    with pytest.raises(DegenerateInputError):
        weighted_gini([1, 2], [0, 0])
    with pytest.raises(DegenerateInputError):
        weighted_gini([0, 0], [1, 1])
    with pytest.raises(InvalidInputError):  # degenerate input is a kind of invalid input
        weighted_lorenz([], [])


fields = st.integers(1, 200).flatmap(lambda n: st.tuples(
    st.lists(st.integers(0, 10_000), min_size=n, max_size=n),
    st.lists(st.integers(0, 5_000), min_size=n, max_size=n),
)).filter(lambda t: sum(t[1]) > 0 and sum(a * w for a, w in zip(*t)) > 0)


@settings(max_examples=100, deadline=None)
@given(fields)
def test_gini_matches_pairwise_and_lorenz(field):
    a, w = field
    g = weighted_gini(a, w)
    assert g == pytest.approx(brute_gini(a, w), abs=1e-9)
    curve = weighted_lorenz(a, w)
    assert g == pytest.approx(1 - 2 * curve.area(), abs=1e-9)
    assert 0 <= g <= 1 - min(w) / sum(w) + 1e-12
    xs, ys = np.array(curve.x), np.array(curve.y)
    assert np.all(np.diff(xs) >= 0) and np.all(np.diff(ys) >= 0)
    assert np.all(ys <= xs + 1e-12)


@settings(max_examples=40, deadline=None)
@given(fields, st.floats(0.01, 1000), st.integers(2, 5))
def test_scale_and_replication_invariance(field, c, k):
    a, w = field
    g = weighted_gini(a, w)
    assert weighted_gini([c * x for x in a], w) == pytest.approx(g, abs=1e-12)
    assert weighted_gini(a, [k * x for x in w]) == pytest.approx(g, abs=1e-12)
    # enumerating individuals one by one gives the same index
    assert weighted_gini(list(a) * k, list(w) * k) == pytest.approx(g, abs=1e-12)


def test_individual_enumeration_equivalence():
    a, w = [3, 0, 10, 4], [2, 1, 3, 1]
    people = [x for x, n in zip(a, w) for _ in range(n)]
    assert weighted_gini(a, w) == pytest.approx(weighted_gini(people, [1] * len(people)), abs=1e-15)


def test_lorenz_on_field_orders_ties_by_id():
    hexes = tuple(Hexagon(i, GeoPoint(45, 7), p) for i, p in enumerate([10, 20, 30]))
    grid = HexGrid(hexes, 1000.0, GeoPoint(45, 7))
    field = AccessibilityField(0, 3600, {0: 5, 1: 5, 2: 1})
    curve = lorenz(field, grid)
    assert curve.x == pytest.approx((0, 0.5, 0.5 + 10 / 60, 1.0))
    assert gini(field, grid).value == pytest.approx(brute_gini([5, 5, 1], [10, 20, 30]), abs=1e-12)


def test_exact_scores_small_city(small_city):
    _, tt, grid = small_city
    res = exact_scores(grid, tt)
    base = gini(accessibility_field(grid, tt), grid).value
    assert res.base.value == base
    assert set(res.delta_g) == set(tt.lines)
    assert res.scans == len(grid) * (len(tt.lines) + 1)
    for lid, d in res.delta_g.items():
        assert d == res.gini_without[lid] - base
    again = exact_scores(grid, tt, threads=2)
    assert again.delta_g == res.delta_g  # bit-identical, independent of worker count


def test_line_without_connections_scores_zero(small_city):
    from dataclasses import replace
    _, tt, grid = small_city
    tt = replace(tt, lines={**tt.lines, "ZZ": Line("ZZ", "bus", "ZZ")})
    res = exact_scores(grid, tt, lines=["ZZ"])
    assert res.delta_g == {"ZZ": 0.0}
