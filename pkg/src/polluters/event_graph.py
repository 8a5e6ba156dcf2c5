"""User/day bipartite graphs and their co-tweet projection."""

from __future__ import annotations

import csv
from collections import defaultdict
from dataclasses import dataclass, field
from datetime import date
from itertools import combinations
from pathlib import Path
from typing import Iterable, Sequence

from .ingest import ConfigError, EventCalendar, TweetRecord, active_day, resolve_tz

DayId = tuple[str, date]
Pair = tuple[str, str]

EVENT_DAYS = "event_days"
ALL_DAYS = "all_days"


def pair(u: str, v: str) -> Pair:
    return (u, v) if u < v else (v, u)


@dataclass
class BipartiteGraph:
    users: set[str] = field(default_factory=set)
    events: set[DayId] = field(default_factory=set)
    incidence: dict[str, frozenset[DayId]] = field(default_factory=dict)
    tweet_counts: dict[str, int] = field(default_factory=dict)

    def neighbourhood(self, user: str) -> frozenset[DayId]:
        return self.incidence.get(user, frozenset())

    def day_members(self) -> dict[DayId, list[str]]:
        members: dict[DayId, list[str]] = defaultdict(list)
        for u in sorted(self.incidence):
            for d in self.incidence[u]:
                members[d].append(u)
        return members


@dataclass
class CoTweetMultigraph:
    """Undirected loopless multigraph; ``edges[(u, v)]`` (u < v) is the
    number of parallel edges, i.e. the number of shared active days."""

    nodes: dict[str, int] = field(default_factory=dict)
    edges: dict[Pair, int] = field(default_factory=dict)

    def multiplicity(self, u: str, v: str) -> int:
        return self.edges.get(pair(u, v), 0)

    def adjacency(self) -> dict[str, dict[str, int]]:
        adj: dict[str, dict[str, int]] = {u: {} for u in self.nodes}
        for (u, v), w in self.edges.items():
            adj[u][v] = w
            adj[v][u] = w
        return adj

    def total_weight(self) -> int:
        return sum(self.edges.values())

    def subgraph(self, members: Iterable[str]) -> "CoTweetMultigraph":
        keep = set(members)
        return CoTweetMultigraph(
            nodes={u: c for u, c in self.nodes.items() if u in keep},
            edges={p: w for p, w in self.edges.items() if p[0] in keep and p[1] in keep},
        )

    def __len__(self) -> int:
        return len(self.nodes)


def build_bipartite(
    records: Sequence[TweetRecord],
    mode: str = ALL_DAYS,
    calendar: EventCalendar | None = None,
    tz="UTC",
) -> BipartiteGraph:
    """Connect each user to the (city, local date) days they tweeted on.

    In ``event_days`` mode only days listed in the calendar for the
    record's city count. Users with no qualifying day are left out, and
    ``tweet_counts`` counts only the tweets that landed on a kept day.
    """
    if mode not in (EVENT_DAYS, ALL_DAYS):
        raise ConfigError(f"unknown graph mode {mode!r}")
    if mode == EVENT_DAYS and calendar is None:
        raise ConfigError("event_days mode requires an event calendar")
    zone = resolve_tz(tz)
    incidence: dict[str, set[DayId]] = defaultdict(set)
    counts: dict[str, int] = defaultdict(int)
    for rec in records:
        day = (rec.city, active_day(rec, zone))
        if mode == EVENT_DAYS and day not in calendar:
            continue
        incidence[rec.user_id].add(day)
        counts[rec.user_id] += 1
    g = BipartiteGraph()
    for u, days in incidence.items():
        g.users.add(u)
        g.events.update(days)
        g.incidence[u] = frozenset(days)
        g.tweet_counts[u] = counts[u]
    return g


def project(bipartite: BipartiteGraph) -> CoTweetMultigraph:
    edges: dict[Pair, int] = defaultdict(int)
    for members in bipartite.day_members().values():
        # members is sorted, so combinations already yields (u, v) with u < v
        for p in combinations(members, 2):
            edges[p] += 1
    nodes = {u: bipartite.tweet_counts.get(u, 0) for u in sorted(bipartite.users)}
    return CoTweetMultigraph(nodes=nodes, edges=dict(sorted(edges.items())))


@dataclass(frozen=True)
class DenseComponent:
    community: int
    members: tuple[str, ...]
    internal_weight: int
    mean_multiplicity: float

    @property
    def size(self) -> int:
        return len(self.members)


def dense_components(
    graph: CoTweetMultigraph,
    partition,
    min_size: int = 3,
    min_internal_multiplicity: float = 2.0,
) -> list[DenseComponent]:
    """Communities whose mean pairwise multiplicity clears a threshold.

    The mean runs over all unordered member pairs, absent edges counting
    as zero, so it is the weighted density of the induced subgraph.
    Singletons have no pairs and are never returned.
    """
    groups: dict[int, list[str]] = defaultdict(list)
    for u in graph.nodes:
        groups[partition.assignment[u]].append(u)
    internal: dict[int, int] = defaultdict(int)
    for (u, v), w in graph.edges.items():
        cu = partition.assignment[u]
        if cu == partition.assignment[v]:
            internal[cu] += w
    out = []
    for cid, members in groups.items():
        s = len(members)
        if s < 2 or s < min_size:
            continue
        mean = internal[cid] / (s * (s - 1) / 2)
        if mean < min_internal_multiplicity:
            continue
        out.append(DenseComponent(cid, tuple(sorted(members)), internal[cid], mean))
    out.sort(key=lambda c: (-c.mean_multiplicity, -c.size, c.members[0]))
    return out


def _dot_id(s: str) -> str:
    return '"' + str(s).replace("\\", "\\\\").replace('"', '\\"') + '"'


def export_dot(graph: CoTweetMultigraph, partition, path: str | Path, name: str = "cotweet") -> None:
    lines = [f"graph {_dot_id(name)} {{"]
    for u in sorted(graph.nodes):
        attrs = f'tweet_count="{graph.nodes[u]}"'
        if partition is not None:
            attrs = f'community="{partition.assignment[u]}", ' + attrs
        lines.append(f"  {_dot_id(u)} [{attrs}];")
    for (u, v), w in sorted(graph.edges.items()):
        lines.append(f'  {_dot_id(u)} -- {_dot_id(v)} [weight="{w}"];')
    lines.append("}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_snapshot(graph: CoTweetMultigraph, partition, edges_path, nodes_path) -> None:
    with open(edges_path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["user_a", "user_b", "multiplicity"])
        for (u, v), m in sorted(graph.edges.items()):
            w.writerow([u, v, m])
    with open(nodes_path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["user_id", "tweet_count", "community"])
        for u in sorted(graph.nodes):
            w.writerow([u, graph.nodes[u], "" if partition is None else partition.assignment[u]])


def read_snapshot(edges_path, nodes_path) -> tuple[CoTweetMultigraph, dict[str, int]]:
    g = CoTweetMultigraph()
    assignment: dict[str, int] = {}
    with open(nodes_path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            g.nodes[row["user_id"]] = int(row["tweet_count"])
            if row["community"] != "":
                assignment[row["user_id"]] = int(row["community"])
    with open(edges_path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            g.edges[pair(row["user_a"], row["user_b"])] = int(row["multiplicity"])
    return g, assignment
