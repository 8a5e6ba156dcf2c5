import random
import re
from datetime import date

import pytest
from hypothesis import given, settings, strategies as st

from conftest import rec
from oracles import projection_pairs
from polluters.community import Partition, louvain
from polluters.event_graph import (
    ALL_DAYS,
    EVENT_DAYS,
    BipartiteGraph,
    CoTweetMultigraph,
    build_bipartite,
    dense_components,
    export_dot,
    project,
    read_snapshot,
    write_snapshot,
)
from polluters.ingest import ConfigError, EventCalendar


def bipartite_from(incidence):
    g = BipartiteGraph()
    for u, days in incidence.items():
        g.users.add(u)
        g.incidence[u] = frozenset(days)
        g.events.update(days)
        g.tweet_counts[u] = len(days)
    return g


def read_dot(text):
    """Parse the DOT dialect written by export_dot."""
    nodes, edges = {}, {}
    for m in re.finditer(r'^\s*"([^"]+)" \[community="(\d+)", tweet_count="(\d+)"\];$', text, re.M):
        nodes[m.group(1)] = (int(m.group(2)), int(m.group(3)))
    for m in re.finditer(r'^\s*"([^"]+)" -- "([^"]+)" \[weight="(\d+)"\];$', text, re.M):
        edges[(m.group(1), m.group(2))] = int(m.group(3))
    return nodes, edges


# -- build_bipartite


def test_no_records_empty_graph():
    g = build_bipartite([], ALL_DAYS)
    assert g.users == set() and g.events == set() and g.incidence == {}


def test_same_day_counted_once():
    recs = [rec(user="A", when="2015-06-01T01:00:00Z"), rec(user="A", when="2015-06-01T20:00:00Z")]
    g = build_bipartite(recs, ALL_DAYS)
    assert g.incidence["A"] == {("Melbourne", date(2015, 6, 1))}
    assert g.tweet_counts["A"] == 2


def test_event_days_filter():
    recs = [rec(user="A", when="2015-06-01T10:00:00Z"), rec(user="A", when="2015-06-02T10:00:00Z")]
    cal = EventCalendar({"Melbourne": frozenset({date(2015, 6, 1)})})
    ev = build_bipartite(recs, EVENT_DAYS, cal)
    al = build_bipartite(recs, ALL_DAYS)
    assert ev.incidence["A"] == {("Melbourne", date(2015, 6, 1))}
    assert al.incidence["A"] == {("Melbourne", date(2015, 6, 1)), ("Melbourne", date(2015, 6, 2))}


def test_event_days_calendar_is_per_city():
    recs = [rec(user="A", when="2015-06-01T10:00:00Z", city="Sydney")]
    cal = EventCalendar({"Melbourne": frozenset({date(2015, 6, 1)})})
    assert build_bipartite(recs, EVENT_DAYS, cal).users == set()


def test_event_days_without_calendar_is_config_error():
    with pytest.raises(ConfigError):
        build_bipartite([], EVENT_DAYS)


def test_cities_never_share_days():
    recs = [rec(user="A", city="Sydney"), rec(user="B", city="Perth")]
    assert project(build_bipartite(recs)).edges == {}


def test_day_bucketing_uses_timezone():
    # 23:30Z on 1 June is already 2 June in Adelaide, where B tweeted at 01:00Z
    recs = [rec(user="A", when="2015-06-01T23:30:00Z"), rec(user="B", when="2015-06-02T01:00:00Z")]
    assert project(build_bipartite(recs, tz="UTC")).edges == {}
    assert project(build_bipartite(recs, tz="Australia/Adelaide")).edges == {("A", "B"): 1}


# -- project


def test_project_example():
    g = project(bipartite_from({"A": {"e1", "e2"}, "B": {"e1", "e2"}, "C": {"e2"}}))
    assert g.edges == {("A", "B"): 2, ("A", "C"): 1, ("B", "C"): 1}


def test_disjoint_users_no_edge():
    assert project(bipartite_from({"A": {"e1"}, "B": {"e2"}})).edges == {}


def test_single_user_no_edges():
    g = project(bipartite_from({"A": {"e1", "e2"}}))
    assert g.edges == {} and g.nodes == {"A": 2}


@st.composite
def incidences(draw):
    n_users = draw(st.integers(1, 12))
    n_days = draw(st.integers(1, 8))
    return {f"u{i}": draw(st.sets(st.integers(0, n_days - 1), min_size=1)) for i in range(n_users)}


@given(incidences())
@settings(max_examples=200)
def test_projection_matches_pairwise_oracle(incidence):
    g = project(bipartite_from(incidence))
    assert g.edges == projection_pairs(incidence)
    assert all(u != v for u, v in g.edges)
    for (u, v), w in g.edges.items():
        assert g.multiplicity(u, v) == g.multiplicity(v, u) == w


# -- dense_components


def _clique(members, w):
    return {(a, b): w for i, a in enumerate(members) for b in members[i + 1:]}


def test_dense_component_found_and_ranked():
    five = ["a", "b", "c", "d", "e"]
    edges = _clique(five, 3) | _clique(["p", "q", "r"], 2) | {("e", "p"): 1}
    g = CoTweetMultigraph({u: 1 for u in five + ["p", "q", "r", "z"]}, edges)
    part = Partition({**{u: 0 for u in five}, "p": 1, "q": 1, "r": 1, "z": 2}, 0.0)
    comps = dense_components(g, part, min_size=3, min_internal_multiplicity=2)
    assert [c.members for c in comps] == [tuple(five), ("p", "q", "r")]
    assert comps[0].mean_multiplicity == 3.0
    assert comps[0].internal_weight == 30


def test_dense_components_none_qualify():
    g = CoTweetMultigraph({"a": 1, "b": 1, "c": 1}, {("a", "b"): 1})
    part = Partition({"a": 0, "b": 0, "c": 0}, 0.0)
    assert dense_components(g, part, min_size=3, min_internal_multiplicity=2) == []


def test_singletons_excluded():
    g = CoTweetMultigraph({"a": 1, "b": 1}, {})
    part = Partition({"a": 0, "b": 1}, 0.0)
    assert dense_components(g, part, min_size=1, min_internal_multiplicity=0) == []


def test_dense_ties_by_size_then_member():
    edges = _clique(["x", "y"], 2) | _clique(["a", "b"], 2) | _clique(["m", "n", "o"], 2)
    g = CoTweetMultigraph({u: 1 for u in "xyabmno"}, edges)
    part = Partition({"x": 0, "y": 0, "a": 1, "b": 1, "m": 2, "n": 2, "o": 2}, 0.0)
    comps = dense_components(g, part, min_size=2, min_internal_multiplicity=1)
    assert [c.members for c in comps] == [("m", "n", "o"), ("a", "b"), ("x", "y")]


def test_component_subgraph():
    g = CoTweetMultigraph({"a": 1, "b": 2, "c": 3}, {("a", "b"): 2, ("b", "c"): 1})
    sub = g.subgraph(["a", "b"])
    assert sub.nodes == {"a": 1, "b": 2} and sub.edges == {("a", "b"): 2}


# -- export


def test_export_empty_graph(tmp_path):
    p = tmp_path / "g.dot"
    export_dot(CoTweetMultigraph(), Partition({}, 0.0), p)
    text = p.read_text()
    assert text == 'graph "cotweet" {\n}\n'


def test_export_single_edge(tmp_path):
    g = CoTweetMultigraph({"A": 3, "B": 1}, {("A", "B"): 2})
    p = tmp_path / "g.dot"
    export_dot(g, louvain(g), p)
    text = p.read_text()
    assert text.count(" -- ") == 1
    assert 'weight="2"' in text


def test_export_round_trip(tmp_path):
    rng = random.Random(3)
    incidence = {f"u{i}": {rng.randrange(6) for _ in range(3)} for i in range(15)}
    g = project(bipartite_from(incidence))
    part = louvain(g, seed=1)
    p = tmp_path / "g.dot"
    export_dot(g, part, p)
    nodes, edges = read_dot(p.read_text())
    assert edges == g.edges
    assert {u: c for u, (_, c) in nodes.items()} == g.nodes
    assert {u: k for u, (k, _) in nodes.items()} == part.assignment


def test_dot_quotes_awkward_ids(tmp_path):
    g = CoTweetMultigraph({'a"b': 1, "c\\d": 1}, {('a"b', "c\\d"): 1})
    p = tmp_path / "g.dot"
    export_dot(g, None, p)
    assert '"a\\"b" -- "c\\\\d"' in p.read_text()


def test_snapshot_round_trip(tmp_path):
    g = project(bipartite_from({"A": {1, 2}, "B": {1, 2}, "C": {2}}))
    part = louvain(g)
    write_snapshot(g, part, tmp_path / "e.csv", tmp_path / "n.csv")
    g2, assignment = read_snapshot(tmp_path / "e.csv", tmp_path / "n.csv")
    assert g2.edges == g.edges and g2.nodes == g.nodes
    assert assignment == part.assignment
    assert (tmp_path / "e.csv").read_text().splitlines()[0] == "user_a,user_b,multiplicity"
    assert (tmp_path / "n.csv").read_text().splitlines()[0] == "user_id,tweet_count,community"
