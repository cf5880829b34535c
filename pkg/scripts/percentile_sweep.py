"""Correlation between fast and exact scores as the percentile cut varies.

The exact scores are computed once per seed; the fast scores are re-cut from
the same cumulative importance at each percentile.

    python scripts/percentile_sweep.py --seeds 3
"""

import argparse
import sys

from transit_equity.equity import exact_scores
from transit_equity.geodata import assign_population, build_grid, filter_low_density
from transit_equity.gtfs import build_timetable
from transit_equity.importance import compute_fast_scores, fast_scores
from transit_equity.errors import DegenerateInputError
from transit_equity.stats import correlate
from transit_equity.synth import SynthSpec, synthesize_network

PERCENTILES = (0.2, 0.35, 0.5, 0.65, 0.8, 0.9, 1.0)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=3)
    ap.add_argument("--weighting", choices=("hexagons", "population"), default="hexagons")
    args = ap.parse_args(argv)

    spec = SynthSpec()
    print("seed  " + "  ".join(f"p={p:<4}" for p in PERCENTILES))
    for seed in range(args.seeds):
        city = synthesize_network(spec, seed)
        tt = build_timetable(city.feed)
        grid = filter_low_density(assign_population(build_grid(city.bbox, 1000.0), city.population), 100.0)
        _, _, cum = compute_fast_scores(grid, tt)
        exact = exact_scores(grid, tt)
        lines = sorted(tt.lines)
        cells = []
        for p in PERCENTILES:
            e = fast_scores(cum, p, args.weighting).e
            try:
                cells.append(f"{correlate([e[l] for l in lines], [exact.delta_g[l] for l in lines]).r:6.3f}")
            except DegenerateInputError:
                cells.append("   n/a")
        print(f"{seed:4d}  " + "  ".join(cells), flush=True)
    return 0


if __name__ == "__main__":
    sys.exit(main())
