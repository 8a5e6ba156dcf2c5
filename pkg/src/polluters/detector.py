"""Turn URL verdicts and dense co-tweet clusters into flagged accounts."""

from __future__ import annotations

import csv
import json
import math
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from datetime import date, datetime, timezone
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .diversity import BOT_URL, UrlDiversityTable, UrlVerdict
from .event_graph import DenseComponent
from .ingest import TweetRecord, UserSnapshot

BOT_URL_LINK = "bot_url_link"
DENSE_CLUSTER = "dense_cluster"
CREATION_BURST = "creation_burst"

DAYS_PER_YEAR = 365.25


@dataclass(frozen=True)
class DetectorConfig:
    cluster_min_multiplicity: float = 2.0
    media_follower_percentile: float = 99.0
    burst_min_count: int = 10


@dataclass
class FlaggedAccount:
    user_id: str
    signals: set[str] = field(default_factory=set)
    evidence: list[tuple[str, str]] = field(default_factory=list)
    account_age_years: float = 0.0
    name_length: int = 0
    verified: bool = False


@dataclass
class CorpusSummary:
    total_tweets: int = 0
    flagged_tweet_count: int = 0
    flagged_tweet_fraction: float = 0.0


@dataclass
class DetectionReport:
    flagged: list[FlaggedAccount] = field(default_factory=list)
    corpus_summary: CorpusSummary = field(default_factory=CorpusSummary)

    @property
    def flagged_ids(self) -> set[str]:
        return {f.user_id for f in self.flagged}


@dataclass(frozen=True)
class CreationBurst:
    creation_date: date
    account_count: int
    unique_name_count: int
    member_ids: tuple[str, ...]


def latest_snapshots(records: Iterable[TweetRecord]) -> dict[str, UserSnapshot]:
    snaps = {}
    for rec in records:
        snaps[rec.user_id] = rec.user
    return snaps


def account_age_years(snapshot: UserSnapshot, as_of: datetime) -> float:
    return (as_of - snapshot.account_created_at).total_seconds() / 86400.0 / DAYS_PER_YEAR


def name_length(name: str) -> int:
    # str length in Python is the count of unicode scalar values
    return len(name)


def default_as_of(records: Sequence[TweetRecord]) -> datetime:
    if not records:
        return datetime(1970, 1, 1, tzinfo=timezone.utc)
    return max(r.created_at for r in records)


def creation_bursts(records: Iterable[TweetRecord], min_count: int = 10) -> list[CreationBurst]:
    """Account-creation dates (UTC) shared by at least ``min_count`` accounts."""
    if min_count < 2:
        raise ValueError("min_count must be >= 2")
    by_day: dict[date, dict[str, UserSnapshot]] = defaultdict(dict)
    for user, snap in latest_snapshots(records).items():
        by_day[snap.account_created_at.astimezone(timezone.utc).date()][user] = snap
    bursts = []
    for day, members in by_day.items():
        if len(members) < min_count:
            continue
        names = {s.display_name.casefold() for s in members.values()}
        bursts.append(CreationBurst(day, len(members), len(names), tuple(sorted(members))))
    bursts.sort(key=lambda b: (-b.account_count, b.creation_date))
    return bursts


def media_accounts(snapshots: Mapping[str, UserSnapshot], percentile: float = 99.0) -> set[str]:
    """Verified accounts plus those above the follower-count percentile."""
    if not snapshots:
        return set()
    followers = np.array([s.followers_count for s in snapshots.values()], dtype=float)
    cutoff = float(np.percentile(followers, percentile))
    return {u for u, s in snapshots.items() if s.verified or s.followers_count > cutoff}


def flag_accounts(
    verdicts: Sequence[UrlVerdict],
    tables: Mapping[str, UrlDiversityTable],
    clusters: Sequence[DenseComponent],
    records: Sequence[TweetRecord],
    config: DetectorConfig | None = None,
    as_of: datetime | None = None,
) -> DetectionReport:
    """Flag accounts from URL and co-tweet evidence.

    Linking to a bot URL is sufficient on its own. Membership of a dense
    cluster only counts when the cluster also holds a bot-URL-linked
    account, and never for media-like accounts (verified, or in the top
    follower percentile). Creation bursts annotate already-flagged
    accounts but do not flag by themselves.
    """
    config = config or DetectorConfig()
    as_of = as_of or default_as_of(records)
    snaps = latest_snapshots(records)
    flagged: dict[str, FlaggedAccount] = {}

    def mark(user: str, signal: str, detail: str) -> None:
        acct = flagged.get(user)
        if acct is None:
            acct = flagged[user] = FlaggedAccount(user)
        acct.signals.add(signal)
        acct.evidence.append((signal, detail))

    for v in sorted(verdicts, key=lambda v: v.url):
        if v.label != BOT_URL:
            continue
        for user in sorted(tables[v.url].users):
            mark(user, BOT_URL_LINK, f"url={v.url} gini={v.gini:.4f} r2={v.r_squared:.4f} n={v.n}")

    url_linked = set(flagged)
    exempt = media_accounts(snaps, config.media_follower_percentile)
    for c in clusters:
        if c.mean_multiplicity <= config.cluster_min_multiplicity:
            continue
        if not url_linked.intersection(c.members):
            continue
        detail = f"community={c.community} size={c.size} mean_multiplicity={c.mean_multiplicity:.4f}"
        for user in c.members:
            if user not in exempt:
                mark(user, DENSE_CLUSTER, detail)

    for b in creation_bursts(records, config.burst_min_count):
        detail = f"date={b.creation_date.isoformat()} accounts={b.account_count} unique_names={b.unique_name_count}"
        for user in b.member_ids:
            if user in flagged:
                mark(user, CREATION_BURST, detail)

    for user, acct in flagged.items():
        snap = snaps.get(user)
        if snap is not None:
            acct.account_age_years = max(0.0, account_age_years(snap, as_of))
            acct.name_length = name_length(snap.screen_name)
            acct.verified = snap.verified

    total = len(records)
    hits = sum(1 for r in records if r.user_id in flagged)
    summary = CorpusSummary(total, hits, hits / total if total else 0.0)
    return DetectionReport([flagged[u] for u in sorted(flagged)], summary)


def write_report(report: DetectionReport, path: str | Path, summary_path: str | Path | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["user_id", "signals", "evidence", "account_age_years", "name_length", "verified"])
        for a in report.flagged:
            w.writerow([
                a.user_id,
                ";".join(sorted(a.signals)),
                " | ".join(f"{s}:{d}" for s, d in a.evidence),
                f"{a.account_age_years:.4f}",
                a.name_length,
                str(a.verified).lower(),
            ])
    if summary_path is not None:
        with open(summary_path, "w", encoding="utf-8") as fh:
            json.dump(asdict(report.corpus_summary) | {"flagged_accounts": len(report.flagged)},
                      fh, indent=2, sort_keys=True)
            fh.write("\n")


# -- population comparison ----------------------------------------------------


@dataclass
class PopulationStats:
    count: int = 0
    ages: list[float] = field(default_factory=list)
    name_lengths: list[int] = field(default_factory=list)
    display_name_lengths: list[int] = field(default_factory=list)
    verified_count: int = 0

    @property
    def mean_age(self) -> float:
        return math.fsum(self.ages) / len(self.ages) if self.ages else 0.0

    @property
    def mean_name_length(self) -> float:
        return sum(self.name_lengths) / len(self.name_lengths) if self.name_lengths else 0.0

    @property
    def mean_display_name_length(self) -> float:
        n = self.display_name_lengths
        return sum(n) / len(n) if n else 0.0


@dataclass
class ComparisonStats:
    flagged: PopulationStats
    legitimate: PopulationStats


def population_stats(flagged: Iterable[str], records: Sequence[TweetRecord], as_of: datetime | None = None) -> ComparisonStats:
    flagged = set(flagged)
    as_of = as_of or default_as_of(records)
    groups = {True: PopulationStats(), False: PopulationStats()}
    snaps = latest_snapshots(records)
    for user in sorted(snaps):
        s = snaps[user]
        g = groups[user in flagged]
        g.count += 1
        g.ages.append(account_age_years(s, as_of))
        g.name_lengths.append(name_length(s.screen_name))
        g.display_name_lengths.append(name_length(s.display_name))
        g.verified_count += s.verified
    return ComparisonStats(groups[True], groups[False])


def _histogram(values, width: float, lo: float = 0.0):
    if not values:
        return []
    top = max(values)
    nbins = max(1, int(math.floor((top - lo) / width)) + 1)
    counts = [0] * nbins
    for v in values:
        counts[min(nbins - 1, max(0, int(math.floor((v - lo) / width))))] += 1
    return [(lo + i * width, lo + (i + 1) * width, c) for i, c in enumerate(counts)]


def write_histograms(stats: ComparisonStats, out_dir: str | Path, age_bin_years: float = 0.5) -> None:
    """Write age and name-length histograms as
    ``population,bin_start,bin_end,count`` CSVs."""
    out_dir = Path(out_dir)
    pops = (("flagged", stats.flagged), ("legitimate", stats.legitimate))
    specs = (
        ("age_hist.csv", "ages", age_bin_years),
        ("name_length_hist.csv", "name_lengths", 1),
        ("display_name_length_hist.csv", "display_name_lengths", 1),
    )
    for fname, attr, width in specs:
        with open(out_dir / fname, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["population", "bin_start", "bin_end", "count"])
            for label, pop in pops:
                for lo, hi, c in _histogram(getattr(pop, attr), width):
                    w.writerow([label, f"{lo:g}", f"{hi:g}", c])
