"""Louvain modularity clustering for co-tweet multigraphs.

Edge multiplicities are used directly as weights. Runs are deterministic:
the node visiting order is a permutation drawn from ``random.Random(seed)``
and, among equally good moves, the community with the lowest id wins.
"""

from __future__ import annotations

import random
from collections import defaultdict
from dataclasses import dataclass, field

from .event_graph import CoTweetMultigraph

_EPS = 1e-12


@dataclass(frozen=True)
class Partition:
    assignment: dict[str, int]
    modularity: float
    resolution: float = 1.0
    # modularity of the flattened partition after every aggregation level,
    # starting with the all-singletons partition
    history: tuple[float, ...] = field(default=(), compare=False)

    def communities(self) -> dict[int, list[str]]:
        out: dict[int, list[str]] = defaultdict(list)
        for u in sorted(self.assignment):
            out[self.assignment[u]].append(u)
        return dict(sorted(out.items()))

    def __len__(self) -> int:
        return len(set(self.assignment.values()))


def modularity(graph: CoTweetMultigraph, assignment: dict[str, int], resolution: float = 1.0) -> float:
    """Weighted Newman modularity, recomputed from scratch.

    An edgeless graph has modularity 0 by convention.
    """
    m = graph.total_weight()
    if m == 0:
        return 0.0
    internal: dict[int, float] = defaultdict(float)
    degree_sum: dict[int, float] = defaultdict(float)
    for (u, v), w in graph.edges.items():
        cu, cv = assignment[u], assignment[v]
        degree_sum[cu] += w
        degree_sum[cv] += w
        if cu == cv:
            internal[cu] += w
    q = 0.0
    for c, tot in degree_sum.items():
        q += internal[c] / m - resolution * (tot / (2.0 * m)) ** 2
    return q


def _canonical_ids(nodes: list[str], labels: dict[str, int]) -> dict[str, int]:
    # nodes is sorted, so ids follow each community's smallest member
    remap: dict[int, int] = {}
    out = {}
    for u in nodes:
        c = labels[u]
        if c not in remap:
            remap[c] = len(remap)
        out[u] = remap[c]
    return out


class _Level:
    """Weighted graph over integer nodes, with self-loops for aggregated
    communities."""

    def __init__(self, n: int):
        self.n = n
        self.adj: list[dict[int, float]] = [dict() for _ in range(n)]
        self.loops = [0.0] * n

    def add(self, a: int, b: int, w: float) -> None:
        if a == b:
            self.loops[a] += w
        else:
            self.adj[a][b] = self.adj[a].get(b, 0.0) + w
            self.adj[b][a] = self.adj[b].get(a, 0.0) + w

    def degrees(self) -> list[float]:
        return [sum(self.adj[i].values()) + 2.0 * self.loops[i] for i in range(self.n)]


def _one_level(level: _Level, m2: float, resolution: float, rng: random.Random) -> tuple[list[int], bool]:
    k = level.degrees()
    com = list(range(level.n))
    tot = k[:]
    order = list(range(level.n))
    rng.shuffle(order)
    moved_any = False
    while True:
        moved = False
        for i in order:
            c_old = com[i]
            links: dict[int, float] = defaultdict(float)
            for j, w in level.adj[i].items():
                links[com[j]] += w
            tot[c_old] -= k[i]
            scale = resolution * k[i] / m2
            best = c_old
            best_gain = links.get(c_old, 0.0) - tot[c_old] * scale
            for c in sorted(links):
                if c == c_old:
                    continue
                gain = links[c] - tot[c] * scale
                if gain > best_gain + _EPS:
                    best, best_gain = c, gain
            tot[best] += k[i]
            if best != c_old:
                com[i] = best
                moved = True
                moved_any = True
        if not moved:
            break
    return com, moved_any


def louvain(graph: CoTweetMultigraph, seed: int = 0, resolution: float = 1.0) -> Partition:
    nodes = sorted(graph.nodes)
    if not nodes:
        return Partition({}, 0.0, resolution, (0.0,))
    index = {u: i for i, u in enumerate(nodes)}
    labels = {u: i for i, u in enumerate(nodes)}
    m = graph.total_weight()
    if m == 0:
        return Partition(labels, 0.0, resolution, (0.0,))

    level = _Level(len(nodes))
    for (u, v), w in sorted(graph.edges.items()):
        level.add(index[u], index[v], float(w))
    rng = random.Random(seed)
    m2 = 2.0 * m
    history = [modularity(graph, labels, resolution)]
    # member[i] = index of the current-level node holding original node i
    member = list(range(len(nodes)))

    while True:
        com, moved = _one_level(level, m2, resolution, rng)
        if not moved:
            break
        relabel: dict[int, int] = {}
        for c in com:
            if c not in relabel:
                relabel[c] = len(relabel)
        member = [relabel[com[member[i]]] for i in range(len(nodes))]
        nxt = _Level(len(relabel))
        for a in range(level.n):
            ca = relabel[com[a]]
            if level.loops[a]:
                nxt.add(ca, ca, level.loops[a])
            for b, w in level.adj[a].items():
                if a < b:
                    nxt.add(ca, relabel[com[b]], w)
        level = nxt
        labels = {u: member[i] for i, u in enumerate(nodes)}
        history.append(modularity(graph, labels, resolution))

    assignment = _canonical_ids(nodes, labels)
    q = modularity(graph, assignment, resolution)
    return Partition(assignment, q, resolution, tuple(history))
