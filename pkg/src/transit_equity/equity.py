"""Lorenz curve, population-weighted Gini index and leave-one-line-out Gini deltas."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .accessibility import (
    DEFAULT_DEPART, DEFAULT_HORIZON, AccessibilityField, WalkTables, _field_task, evaluate,
    make_context, run_tasks,
)
from .errors import DegenerateInputError
from .geodata import HexGrid
from .gtfs import Timetable
from .router import WalkModel


@dataclass(frozen=True)
class LorenzCurve:
    x: tuple[float, ...]
    y: tuple[float, ...]

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.x, self.y))

    def area(self) -> float:
        """Trapezoid area under the curve."""
        x, y = np.asarray(self.x), np.asarray(self.y)
        return float(np.sum(np.diff(x) * (y[1:] + y[:-1])) / 2.0)


@dataclass(frozen=True)
class GiniScore:
    value: float

    def __float__(self) -> float:
        return self.value


@dataclass(frozen=True)
class ExactEquityScores:
    delta_g: dict[str, float]
    base: GiniScore
    depart: float
    gini_without: dict[str, float] = field(default_factory=dict)
    scans: int = 0
    wall_s: float = 0.0


def _sorted_weights(values: Sequence[float], weights: Sequence[float], ids: Sequence[int] | None = None):
    a = np.asarray(values, dtype=float)
    w = np.asarray(weights, dtype=float)
    if a.shape != w.shape or a.ndim != 1 or a.size == 0:
        raise DegenerateInputError("need equal-length, non-empty value and weight vectors")
    if np.any(w < 0) or np.any(a < 0):
        raise DegenerateInputError("weights and values must be non-negative")
    keys = np.arange(a.size) if ids is None else np.asarray(ids)
    order = np.lexsort((keys, a))
    a, w = a[order], w[order]
    total_w = w.sum()
    total_wa = float(np.dot(w, a))
    if total_w <= 0:
        raise DegenerateInputError("total population is zero")
    if total_wa <= 0:
        raise DegenerateInputError("total accessibility is zero")
    return a, w, total_w, total_wa


def weighted_lorenz(values, weights, ids=None) -> LorenzCurve:
    a, w, total_w, total_wa = _sorted_weights(values, weights, ids)
    x = np.concatenate([[0.0], np.cumsum(w) / total_w])
    y = np.concatenate([[0.0], np.cumsum(w * a) / total_wa])
    x[-1] = y[-1] = 1.0
    return LorenzCurve(tuple(x.tolist()), tuple(y.tolist()))


def weighted_gini(values, weights) -> float:
    """sum_ij w_i w_j |a_i - a_j| / (2 W^2 mean), via prefix sums over the sorted values."""
    a, w, total_w, total_wa = _sorted_weights(values, weights)
    w_before = np.cumsum(w) - w
    wa_before = np.cumsum(w * a) - w * a
    half_pairs = float(np.sum(w * (a * w_before - wa_before)))
    return float(min(1.0, max(0.0, half_pairs / (total_w * total_wa))))


def _field_vectors(field: AccessibilityField, grid: HexGrid):
    ids = grid.ids
    return [field.scores[h] for h in ids], [grid[h].population for h in ids], ids


def lorenz(field: AccessibilityField, grid: HexGrid) -> LorenzCurve:
    a, w, ids = _field_vectors(field, grid)
    return weighted_lorenz(a, w, ids)


def gini(field: AccessibilityField, grid: HexGrid) -> GiniScore:
    a, w, _ = _field_vectors(field, grid)
    return GiniScore(weighted_gini(a, w))


def exact_scores(grid: HexGrid, tt: Timetable, walk: WalkModel | None = None, *,
                 depart: float = DEFAULT_DEPART, horizon: float = DEFAULT_HORIZON,
                 threads: int = 1, tables: WalkTables | None = None,
                 lines: Sequence[str] | None = None) -> ExactEquityScores:
    """Recompute accessibility and Gini once per removed line."""
    t0 = time.perf_counter()
    ctx = make_context(grid, tt, walk, depart=depart, horizon=horizon, tables=tables)
    base_scores, _ = evaluate(ctx, with_importance=False, threads=threads)
    base = gini(AccessibilityField(ctx.depart, ctx.horizon, base_scores), grid)
    line_ids = list(tt.lines) if lines is None else list(lines)
    results = run_tasks(ctx, _field_task, [(lid, False) for lid in line_ids], threads)
    without: dict[str, float] = {}
    scans = len(base_scores)
    for lid, (tag, scores, _) in zip(line_ids, results):
        without[lid] = gini(AccessibilityField(ctx.depart, ctx.horizon, scores, tag), grid).value
        scans += len(scores)
    delta = {lid: without[lid] - base.value for lid in line_ids}
    return ExactEquityScores(delta, base, ctx.depart, without, scans, time.perf_counter() - t0)

