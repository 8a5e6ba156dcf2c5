import csv
import json
from datetime import datetime, timedelta, timezone

import pytest
from hypothesis import given, settings, strategies as st

from conftest import rec
from polluters.detector import (
    BOT_URL_LINK,
    CREATION_BURST,
    DENSE_CLUSTER,
    DetectorConfig,
    account_age_years,
    creation_bursts,
    flag_accounts,
    latest_snapshots,
    media_accounts,
    name_length,
    population_stats,
    write_histograms,
    write_report,
)
from polluters.diversity import BOT_URL, LEGITIMATE, DiversityTriple, UrlDiversityTable, UrlVerdict
from polluters.event_graph import DenseComponent
from polluters.ingest import record_from_dict
from polluters.synth import BOT, SynthConfig, generate_records

UTC = timezone.utc


def bot_verdict(url, n):
    return UrlVerdict(url, 0.01, 0.0, n, BOT_URL)


def table(url, users):
    return UrlDiversityTable(url, {u: DiversityTriple(3, 1) for u in users})


# -- flag_accounts


def test_nothing_to_flag():
    recs = [rec(user="a"), rec(user="b")]
    report = flag_accounts([], {}, [], recs)
    assert report.flagged == []
    assert report.corpus_summary.flagged_tweet_fraction == 0.0
    assert report.corpus_summary.total_tweets == 2


def test_empty_corpus():
    report = flag_accounts([], {}, [], [])
    assert report.flagged == [] and report.corpus_summary.total_tweets == 0


def test_bot_url_flags_every_linker():
    users = [f"b{i}" for i in range(6)]
    recs = [rec(user=u, urls=["http://shrt.lnk/x"]) for u in users] + [rec(user="clean")]
    report = flag_accounts([bot_verdict("shrt.lnk/x", 6)], {"shrt.lnk/x": table("shrt.lnk/x", users)}, [], recs)
    assert report.flagged_ids == set(users)
    for acct in report.flagged:
        assert acct.signals == {BOT_URL_LINK}
        assert acct.evidence and acct.evidence[0][0] == BOT_URL_LINK
        assert "shrt.lnk/x" in acct.evidence[0][1]


def test_legitimate_url_flags_nobody():
    users = [f"u{i}" for i in range(6)]
    recs = [rec(user=u) for u in users]
    v = UrlVerdict("news.com", 0.8, 0.95, 6, LEGITIMATE)
    assert flag_accounts([v], {"news.com": table("news.com", users)}, [], recs).flagged == []


def _cluster_case(mean, with_linker=True, verified_member=False):
    members = ("c1", "c2", "c3", "c4")
    recs = [rec(user=u, verified=(verified_member and u == "c4")) for u in members]
    recs += [rec(user=f"x{i}") for i in range(10)]
    linkers = ["c1"] if with_linker else ["x0"]
    recs += [rec(user=u, urls=["http://shrt.lnk/x"]) for u in linkers]
    comp = DenseComponent(7, members, int(mean * 6), mean)
    # fixture accounts share a creation date; keep the burst annotation out of the way
    cfg = DetectorConfig(burst_min_count=1000)
    return flag_accounts([bot_verdict("shrt.lnk/x", 1)], {"shrt.lnk/x": table("shrt.lnk/x", linkers)}, [comp], recs, cfg)


def test_dense_cluster_with_linker_flags_members():
    report = _cluster_case(3.0)
    assert report.flagged_ids == {"c1", "c2", "c3", "c4"}
    by_id = {a.user_id: a for a in report.flagged}
    assert by_id["c1"].signals == {BOT_URL_LINK, DENSE_CLUSTER}
    assert by_id["c2"].signals == {DENSE_CLUSTER}
    assert "community=7" in by_id["c2"].evidence[0][1]


def test_dense_cluster_needs_a_url_linked_member():
    assert _cluster_case(3.0, with_linker=False).flagged_ids == {"x0"}


def test_dense_cluster_threshold_is_strict():
    assert _cluster_case(2.0).flagged_ids == {"c1"}


def test_media_member_exempt():
    assert "c4" not in _cluster_case(3.0, verified_member=True).flagged_ids


def test_high_follower_member_exempt():
    members = tuple(f"c{i}" for i in range(4))
    recs = [rec(user=u, followers=(10**6 if u == "c3" else 10)) for u in members]
    recs += [rec(user=f"x{i}", followers=10) for i in range(300)]
    recs.append(rec(user="c0", urls=["http://shrt.lnk/x"], followers=10))
    comp = DenseComponent(0, members, 18, 3.0)
    report = flag_accounts([bot_verdict("shrt.lnk/x", 1)], {"shrt.lnk/x": table("shrt.lnk/x", ["c0"])}, [comp], recs)
    assert report.flagged_ids == {"c0", "c1", "c2"}


def test_media_accounts_percentile():
    snaps = latest_snapshots([rec(user=f"u{i}", followers=i) for i in range(100)] + [rec(user="v", verified=True, followers=0)])
    assert media_accounts(snaps, 99.0) == {"u99", "v"}
    assert media_accounts({}, 99.0) == set()


@given(st.sets(st.integers(0, 19), max_size=20), st.sets(st.integers(0, 19), max_size=20))
@settings(max_examples=50, deadline=None)
def test_more_bot_urls_never_unflag(a, b):
    recs = [rec(user=f"u{i}", urls=[f"http://s{i % 4}.com"]) for i in range(20)]
    tables = {f"s{k}.com": table(f"s{k}.com", [f"u{i}" for i in range(20) if i % 4 == k]) for k in range(4)}
    small = {i % 4 for i in a}
    large = small | {i % 4 for i in b}
    f_small = flag_accounts([bot_verdict(f"s{k}.com", 5) for k in small], tables, [], recs).flagged_ids
    f_large = flag_accounts([bot_verdict(f"s{k}.com", 5) for k in large], tables, [], recs).flagged_ids
    assert f_small <= f_large


def test_flagged_fraction_matches_recount():
    recs = [rec(user="b", urls=["http://shrt.lnk/x"])] * 3 + [rec(user="c")] * 7
    report = flag_accounts([bot_verdict("shrt.lnk/x", 1)], {"shrt.lnk/x": table("shrt.lnk/x", ["b"])}, [], recs)
    s = report.corpus_summary
    assert (s.total_tweets, s.flagged_tweet_count) == (10, 3)
    assert s.flagged_tweet_fraction == sum(r.user_id == "b" for r in recs) / len(recs)


def test_burst_annotates_only_flagged_accounts():
    day = "2014-02-20T03:00:00Z"
    recs = [rec(user=f"b{i}", created=day, display_name="Sam") for i in range(12)]
    recs += [rec(user="b0", urls=["http://shrt.lnk/x"], created=day, display_name="Sam")]
    report = flag_accounts([bot_verdict("shrt.lnk/x", 1)], {"shrt.lnk/x": table("shrt.lnk/x", ["b0"])}, [], recs)
    assert report.flagged_ids == {"b0"}
    assert report.flagged[0].signals == {BOT_URL_LINK, CREATION_BURST}


def test_attributes_on_flagged(as_of):
    recs = [rec(user="b", screen_name="abcdef", created="2015-01-01T00:00:00Z", urls=["http://shrt.lnk/x"], verified=True)]
    report = flag_accounts([bot_verdict("shrt.lnk/x", 1)], {"shrt.lnk/x": table("shrt.lnk/x", ["b"])}, [], recs, as_of=as_of)
    a = report.flagged[0]
    assert a.name_length == 6 and a.verified
    assert a.account_age_years == pytest.approx(731 / 365.25, abs=1e-12)


def test_write_report(tmp_path):
    recs = [rec(user="b", urls=["http://shrt.lnk/x"]), rec(user="c")]
    report = flag_accounts([bot_verdict("shrt.lnk/x", 1)], {"shrt.lnk/x": table("shrt.lnk/x", ["b"])}, [], recs)
    write_report(report, tmp_path / "r.csv", tmp_path / "s.json")
    rows = list(csv.DictReader(open(tmp_path / "r.csv")))
    assert [r["user_id"] for r in rows] == ["b"]
    assert rows[0]["signals"] == BOT_URL_LINK and rows[0]["evidence"].startswith(BOT_URL_LINK + ":")
    summary = json.loads((tmp_path / "s.json").read_text())
    assert summary["flagged_tweet_fraction"] == 0.5 and summary["flagged_accounts"] == 1


# -- creation_bursts


def _accounts(specs):
    """specs: (user, created, display_name)."""
    return [rec(user=u, created=c, display_name=n, when="2017-01-01T00:00:00Z") for u, c, n in specs]


def test_reported_burst_shape():
    names = [f"Name{i}" for i in range(12)]
    recs = _accounts([(f"u{i}", "2014-02-20T05:00:00Z", names[i % 12]) for i in range(109)])
    bursts = creation_bursts(recs, 10)
    assert [(b.account_count, b.unique_name_count) for b in bursts] == [(109, 12)]


def test_names_compared_case_insensitively():
    recs = _accounts([(f"u{i}", "2014-02-20T05:00:00Z", "Sam" if i % 2 else "SAM") for i in range(10)])
    assert creation_bursts(recs, 10)[0].unique_name_count == 1


def test_small_day_below_threshold():
    recs = _accounts([(f"u{i}", "2016-03-30T01:00:00Z", f"n{i}") for i in range(8)])
    assert creation_bursts(recs, 10) == []
    assert creation_bursts(recs, 8)[0].account_count == 8


def test_all_distinct_dates():
    start = datetime(2010, 1, 1, tzinfo=UTC)
    recs = _accounts([(f"u{i}", (start + timedelta(days=i)).strftime("%Y-%m-%dT%H:%M:%SZ"), "x") for i in range(50)])
    assert creation_bursts(recs, 2) == []


def test_burst_min_count_validated():
    with pytest.raises(ValueError):
        creation_bursts([], 1)


@given(st.lists(st.tuples(st.integers(0, 30), st.integers(0, 3)), max_size=80))
def test_no_account_in_two_bursts(spec):
    recs = _accounts([(f"u{u}", f"2014-02-{20 + d:02d}T12:00:00Z", "n") for u, d in spec])
    bursts = creation_bursts(recs, 2)
    seen = [m for b in bursts for m in b.member_ids]
    assert len(seen) == len(set(seen))
    assert all(b.account_count >= 2 and 1 <= b.unique_name_count <= b.account_count for b in bursts)


# -- population_stats


def test_age_exact(as_of):
    s = population_stats({"a"}, [rec(user="a", created="2015-01-01T00:00:00Z")], as_of=datetime(2016, 12, 31, 12, tzinfo=UTC))
    assert s.flagged.mean_age == pytest.approx(2.0, abs=1e-9)
    assert s.legitimate.count == 0 and s.legitimate.mean_age == 0.0


def test_empty_flagged_set():
    s = population_stats(set(), [rec(user="a"), rec(user="b")])
    assert s.flagged.count == 0 and s.legitimate.count == 2


def test_name_length_counts_scalars():
    assert name_length("abc") == 3
    assert name_length("é😀") == 2


def test_age_uses_julian_year():
    snap = rec(created="2016-01-01T00:00:00Z", when="2016-06-01T00:00:00Z").user
    assert account_age_years(snap, datetime(2016, 1, 1, tzinfo=UTC) + timedelta(days=365.25)) == pytest.approx(1.0, abs=1e-15)


def test_synth_ages_recovered():
    out = generate_records(SynthConfig(seed=4, n_legit_users=600, n_bots=200, days=20, n_bot_urls=4))
    recs = [record_from_dict(r) for r in out.rows]
    bots = {u for u, lab in out.truth.items() if lab == BOT}
    s = population_stats(bots, recs, as_of=out.as_of)
    assert s.flagged.mean_age == pytest.approx(2.9, abs=0.05)
    assert s.legitimate.mean_age == pytest.approx(4.2, abs=0.05)


def test_histograms_written(tmp_path):
    recs = [rec(user="a", created="2015-01-01T00:00:00Z", screen_name="abc"),
            rec(user="b", created="2013-01-01T00:00:00Z", screen_name="abcdef")]
    stats = population_stats({"a"}, recs, as_of=datetime(2017, 1, 1, tzinfo=UTC))
    write_histograms(stats, tmp_path)
    for name in ("age_hist.csv", "name_length_hist.csv", "display_name_length_hist.csv"):
        rows = list(csv.DictReader(open(tmp_path / name)))
        assert list(rows[0]) == ["population", "bin_start", "bin_end", "count"]
        for pop in ("flagged", "legitimate"):
            assert sum(int(r["count"]) for r in rows if r["population"] == pop) == 1
    ages = list(csv.DictReader(open(tmp_path / "age_hist.csv")))
    flagged_bin = [r for r in ages if r["population"] == "flagged" and r["count"] == "1"][0]
    assert (flagged_bin["bin_start"], flagged_bin["bin_end"]) == ("2", "2.5")
