"""Fast equity scores from line importance accumulated during the accessibility pass.

The importance of line ``l`` for hexagon ``h`` is the in-vehicle distance
covered on ``l`` by the earliest-arrival journey tree rooted at ``h``. Summing
it over the hexagons with the lowest accessibility (up to a percentile rank)
yields a per-line score that needs only one scan per hexagon.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .accessibility import (
    DEFAULT_DEPART, DEFAULT_HORIZON, AccessibilityField, WalkTables, evaluate, make_context,
)
from .errors import InvalidInputError
from .geodata import HexGrid
from .gtfs import Timetable
from .router import JourneyTree, WalkModel


@dataclass(frozen=True)
class ImportanceMatrix:
    depart: float
    lines: tuple[str, ...]
    entries: dict[int, dict[str, float]]  # hex id -> line id -> meters, zeros omitted

    def get(self, hex_id: int, line: str) -> float:
        return self.entries.get(hex_id, {}).get(line, 0.0)

    def as_array(self, hex_ids) -> np.ndarray:
        col = {l: j for j, l in enumerate(self.lines)}
        out = np.zeros((len(hex_ids), len(self.lines)))
        for i, h in enumerate(hex_ids):
            for l, v in self.entries.get(h, {}).items():
                out[i, col[l]] = v
        return out


@dataclass(frozen=True)
class CumulativeImportance:
    hex_order: tuple[int, ...]
    lines: tuple[str, ...]
    prefix: np.ndarray  # shape (len(hex_order), len(lines)); row k = I at rank k+1
    populations: tuple[int, ...] = ()

    def of(self, line: str) -> np.ndarray:
        return self.prefix[:, self.lines.index(line)]


@dataclass(frozen=True)
class FastEquityScores:
    e: dict[str, float]
    percentile: float
    depart: float
    rank: int = 0
    hex_id: int | None = None
    base_gini: float | None = None
    scans: int = 0
    wall_s: float = 0.0


def line_importance(tree: JourneyTree) -> dict[str, float]:
    out: dict[str, float] = {}
    for line, length in zip(tree.lines, tree.lengths_m):
        out[line] = out.get(line, 0.0) + length
    return out


def importance_matrix(grid: HexGrid, tt: Timetable, walk: WalkModel | None = None, *,
                      depart: float = DEFAULT_DEPART, horizon: float = DEFAULT_HORIZON,
                      threads: int = 1, tables: WalkTables | None = None
                      ) -> tuple[AccessibilityField, ImportanceMatrix]:
    """Accessibility field and importance matrix from a single scan per hexagon."""
    ctx = make_context(grid, tt, walk, depart=depart, horizon=horizon, tables=tables)
    scores, imp = evaluate(ctx, with_importance=True, threads=threads)
    field = AccessibilityField(ctx.depart, ctx.horizon, scores, tt.tag, scans=len(scores))
    entries = {h: {l: v for l, v in sorted(d.items()) if v > 0} for h, d in imp.items()}
    return field, ImportanceMatrix(ctx.depart, tuple(tt.lines), entries)


def hex_order(field: AccessibilityField) -> list[int]:
    """Worst to best accessibility, ties by hexagon id."""
    return sorted(field.scores, key=lambda h: (field.scores[h], h))


def cumulative_importance(matrix: ImportanceMatrix, field: AccessibilityField,
                          grid: HexGrid | None = None) -> CumulativeImportance:
    if not set(matrix.entries) <= set(field.scores):
        raise InvalidInputError("importance matrix and accessibility field cover different hexagons")
    order = hex_order(field)
    prefix = np.cumsum(matrix.as_array(order), axis=0)
    pops = tuple(grid[h].population for h in order) if grid is not None else ()
    return CumulativeImportance(tuple(order), matrix.lines, prefix, pops)


def percentile_rank(n: int, percentile: float) -> int:
    """1-based rank ``ceil(percentile * n)``."""
    if n < 1:
        raise InvalidInputError("empty grid")
    if not 0 < percentile <= 1:
        raise InvalidInputError("percentile must lie in (0, 1]")
    # round away representation noise such as 0.65 * 100 = 65.00000000000001
    return max(1, min(n, math.ceil(round(percentile * n, 9))))


def fast_scores(cum: CumulativeImportance, percentile: float = 0.65,
                weighting: str = "hexagons") -> FastEquityScores:
    n = len(cum.hex_order)
    if weighting == "hexagons":
        rank = percentile_rank(n, percentile)
    elif weighting == "population":
        if not cum.populations:
            raise InvalidInputError("population weighting needs populations in the cumulative importance")
        percentile_rank(n, percentile)
        cum_pop = np.cumsum(cum.populations) / max(1, sum(cum.populations))
        rank = int(np.searchsorted(cum_pop, percentile - 1e-12) + 1)
        rank = min(rank, n)
    else:
        raise InvalidInputError(f"unknown percentile weighting {weighting!r}")
    row = cum.prefix[rank - 1]
    e = {l: float(row[j]) for j, l in enumerate(cum.lines)}
    return FastEquityScores(e, percentile, 0.0, rank, cum.hex_order[rank - 1])


def compute_fast_scores(grid: HexGrid, tt: Timetable, walk: WalkModel | None = None, *,
                        depart: float = DEFAULT_DEPART, horizon: float = DEFAULT_HORIZON,
                        percentile: float = 0.65, weighting: str = "hexagons",
                        threads: int = 1, tables: WalkTables | None = None):
    """Full fast path. Returns ``(scores, field, cumulative importance)``."""
    from .equity import gini

    t0 = time.perf_counter()
    field, matrix = importance_matrix(grid, tt, walk, depart=depart, horizon=horizon,
                                      threads=threads, tables=tables)
    cum = cumulative_importance(matrix, field, grid)
    fs = fast_scores(cum, percentile, weighting)
    base = gini(field, grid).value
    wall = time.perf_counter() - t0
    scores = FastEquityScores(fs.e, percentile, field.depart, fs.rank, fs.hex_id, base, field.scans, wall)
    return scores, field, cum
