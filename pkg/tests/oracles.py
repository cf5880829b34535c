"""Independent reference computations used by the test-suite.

Nothing here imports the scanning code: the time-expanded graph is built from
the raw connection list and solved with networkx's Dijkstra.
"""

from __future__ import annotations

import math
from collections import defaultdict

import networkx as nx

SRC = ("src",)


def time_expanded_graph(connections, footpaths, access, depart, horizon, slack):
    """Event graph with node time = depart + shortest distance from SRC.

    Node kinds: ("W", s, t) standing at s after walking, ("V", s, t) standing
    at s after alighting, ("R", s, t) ready to board at s, ("C", i) riding
    connection i. ``footpaths`` maps stop -> list of (stop, seconds).
    """
    limit = depart + horizon
    g = nx.DiGraph()
    g.add_node(SRC)
    ready_times = defaultdict(set)
    stand = []  # (kind, stop, time)

    def add_edge(u, v, w):
        assert w >= 0
        if g.has_edge(u, v):
            w = min(w, g[u][v]["weight"])
        g.add_edge(u, v, weight=w)

    # walking closure of every "standing" event is built lazily by repeated passes
    def standing(kind, s, t):
        node = (kind, s, t)
        if node not in g:
            g.add_node(node)
            stand.append(node)
        return node

    for s, w in access:
        t = depart + w
        if t <= limit:
            add_edge(SRC, standing("W", s, t), w)

    usable = [i for i, c in enumerate(connections) if depart <= c.dep <= limit]
    by_trip = defaultdict(list)
    for i in usable:
        by_trip[connections[i].trip].append(i)
    for trip, idx in by_trip.items():
        idx.sort(key=lambda i: (connections[i].dep, connections[i].seq))
        for a, b in zip(idx, idx[1:]):
            add_edge(("C", a), ("C", b), connections[b].dep - connections[a].dep)
    for i in usable:
        c = connections[i]
        ready_times[c.from_stop].add(c.dep)
        add_edge(("R", c.from_stop, c.dep), ("C", i), 0)
        if c.arr <= limit:
            add_edge(("C", i), standing("V", c.to_stop, c.arr), c.arr - c.dep)

    k = 0
    while k < len(stand):
        kind, s, t = stand[k]
        k += 1
        ready_at = t if kind == "W" else t + slack
        ready_times[s].add(ready_at)
        add_edge((kind, s, t), ("R", s, ready_at), ready_at - t)
        for v, d in footpaths.get(s, ()):
            if t + d <= limit:
                add_edge((kind, s, t), standing("W", v, t + d), d)

    for s, times in ready_times.items():
        ts = sorted(times)
        for a, b in zip(ts, ts[1:]):
            add_edge(("R", s, a), ("R", s, b), b - a)
    return g


def oracle_arrivals(connections, footpaths, access, depart, horizon, slack):
    g = time_expanded_graph(connections, footpaths, access, depart, horizon, slack)
    dist = nx.single_source_dijkstra_path_length(g, SRC, weight="weight")
    best = {}
    for node, d in dist.items():
        if node[0] in ("W", "V"):
            s = node[1]
            t = depart + d
            assert math.isclose(t, node[2], abs_tol=1e-6)
            if t <= depart + horizon and t < best.get(s, math.inf):
                best[s] = t
    return best


def shortest_path_sets(g, dist, target, limit=500):
    """Connection sets of every shortest path in ``g`` to ``target``'s earliest arrival.

    ``dist`` is the Dijkstra distance map from SRC. Enumeration stops after
    ``limit`` paths; the flag says whether it was complete.
    """
    ends = [n for n in dist if n[0] in ("W", "V") and n[1] == target]
    if not ends:
        return set(), True
    best = min(dist[n] for n in ends)
    sets, count = set(), 0
    for end in (n for n in ends if dist[n] == best):
        for path in nx.all_shortest_paths(g, SRC, end, weight="weight"):
            sets.add(frozenset(n[1] for n in path if n[0] == "C"))
            count += 1
            if count >= limit:
                return sets, False
    return sets, True


def brute_gini(values, weights):
    n = len(values)
    total_w = sum(weights)
    mean = sum(w * a for w, a in zip(weights, values)) / total_w
    acc = 0.0
    for i in range(n):
        for j in range(n):
            acc += weights[i] * weights[j] * abs(values[i] - values[j])
    return acc / (2 * total_w * total_w * mean)


def point_in_polygon(x, y, ring):
    """Ray casting; ring is a list of (x, y) vertices (not closed)."""
    inside = False
    n = len(ring)
    for i in range(n):
        x1, y1 = ring[i]
        x2, y2 = ring[(i + 1) % n]
        if (y1 > y) != (y2 > y):
            xc = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            if xc > x:
                inside = not inside
    return inside
