"""Per-URL message diversity: who tweets a URL, and how varied their other
link activity is."""

from __future__ import annotations

import csv
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .ingest import TweetRecord

LEGITIMATE = "legitimate"
BOT_URL = "bot_url"
INDETERMINATE = "indeterminate"


@dataclass(frozen=True)
class DiversityTriple:
    u_all: int
    u_k: int

    @property
    def u_d(self) -> int:
        return self.u_all - self.u_k


@dataclass
class UrlDiversityTable:
    url: str
    users: dict[str, DiversityTriple] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.users)

    def scores(self) -> list[int]:
        return [self.users[u].u_d for u in sorted(self.users)]


@dataclass(frozen=True)
class DiversityThresholds:
    gini: float = 0.4
    r_squared: float = 0.5
    min_users: int = 5


@dataclass(frozen=True)
class UrlVerdict:
    url: str
    gini: float
    r_squared: float
    n: int
    label: str


class RankSizeFit(NamedTuple):
    r_squared: float
    exponent: float
    coefficient: float


def url_mention_counts(records: Iterable[TweetRecord]) -> Counter:
    counts: Counter = Counter()
    for rec in records:
        counts.update(rec.distinct_urls)
    return counts


def top_k_urls(records: Iterable[TweetRecord], k: int = 20) -> list[str]:
    if k < 1:
        raise ValueError("k must be >= 1")
    counts = url_mention_counts(records)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return [url for url, _ in ranked[:k]]


class UrlIndex:
    """One pass over the corpus; answers diversity_table for any URL."""

    def __init__(self, records: Iterable[TweetRecord]):
        self.u_all: Counter = Counter()
        self.mentions: dict[str, Counter] = defaultdict(Counter)
        for rec in records:
            if not rec.has_url:
                continue
            self.u_all[rec.user_id] += 1
            for url in rec.distinct_urls:
                self.mentions[url][rec.user_id] += 1

    def table(self, url: str) -> UrlDiversityTable:
        users = {
            u: DiversityTriple(self.u_all[u], c)
            for u, c in sorted(self.mentions.get(url, {}).items())
        }
        return UrlDiversityTable(url, users)


def diversity_table(records: Sequence[TweetRecord], url: str) -> UrlDiversityTable:
    return UrlIndex(records).table(url)


def diversity_tables(records: Sequence[TweetRecord], urls: Iterable[str]) -> dict[str, UrlDiversityTable]:
    index = UrlIndex(records)
    return {url: index.table(url) for url in urls}


def _validated(scores) -> np.ndarray:
    x = np.asarray(list(scores), dtype=float)
    if x.size == 0:
        raise ValueError("scores must be nonempty")
    if np.any(x < 0) or not np.all(np.isfinite(x)):
        raise ValueError("scores must be finite and nonnegative")
    return x


def gini(scores) -> float:
    """Gini coefficient of nonnegative scores; 0 when they all sum to 0.

    Uses the sorted form sum((2i - n - 1) * x_(i)) / (n * sum(x)), which
    equals the mean-absolute-difference definition.
    """
    return float(gini_rows(_validated(scores)[None, :])[0])


def gini_rows(matrix) -> np.ndarray:
    """Row-wise Gini of a 2-D array of nonnegative scores."""
    x = np.sort(np.asarray(matrix, dtype=float), axis=1)
    n = x.shape[1]
    if n == 0:
        raise ValueError("gini needs at least one score")
    if np.any(x < 0):
        raise ValueError("scores must be nonnegative")
    total = x.sum(axis=1)
    weights = 2 * np.arange(1, n + 1) - n - 1
    num = x @ weights
    safe = np.where(total == 0, 1.0, total)
    g = np.where(total == 0, 0.0, num / (n * safe))
    return np.clip(g, 0.0, 1.0)


def rank_size_fit(scores) -> RankSizeFit:
    """Fit log(score) = log(a) - b * log(rank) over the positive scores.

    Scores are ranked in descending order. Zeros are excluded since
    their log is undefined. With fewer than two positive scores, or no
    variance left in log(score), the fit explains nothing and R^2 is 0.
    """
    x = _validated(scores)
    if x.size < 2:
        raise ValueError("rank-size fit needs at least two scores")
    s = np.sort(x)[::-1]
    ranks = np.arange(1, s.size + 1, dtype=float)
    keep = s > 0
    if keep.sum() < 2:
        return RankSizeFit(0.0, float("nan"), float("nan"))
    lx = np.log(ranks[keep])
    ly = np.log(s[keep])
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    if ss_tot == 0.0:
        return RankSizeFit(0.0, 0.0, float(np.exp(ly.mean())))
    design = np.column_stack([np.ones_like(lx), lx])
    (intercept, slope), *_ = np.linalg.lstsq(design, ly, rcond=None)
    resid = ly - (intercept + slope * lx)
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot
    return RankSizeFit(min(max(r2, 0.0), 1.0), float(-slope), float(np.exp(intercept)))


def label_for(gini_value: float, r_squared: float, n: int, thresholds: DiversityThresholds) -> str:
    if n >= thresholds.min_users and gini_value < thresholds.gini and r_squared < thresholds.r_squared:
        return BOT_URL
    if gini_value >= thresholds.gini and r_squared >= thresholds.r_squared:
        return LEGITIMATE
    return INDETERMINATE


def classify_url(table: UrlDiversityTable, thresholds: DiversityThresholds | None = None) -> UrlVerdict:
    thresholds = thresholds or DiversityThresholds()
    scores = table.scores()
    g = gini(scores) if scores else 0.0
    r2 = rank_size_fit(scores).r_squared if len(scores) >= 2 else 0.0
    return UrlVerdict(table.url, g, r2, table.n, label_for(g, r2, table.n, thresholds))


def write_verdicts(verdicts: Iterable[UrlVerdict], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["url", "n", "gini", "r_squared", "label"])
        for v in verdicts:
            w.writerow([v.url, v.n, f"{v.gini:.6f}", f"{v.r_squared:.6f}", v.label])


def write_distribution(tables: Iterable[UrlDiversityTable], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["url", "user_id", "u_all", "u_k", "u_d"])
        for t in tables:
            for u in sorted(t.users):
                tr = t.users[u]
                w.writerow([t.url, u, tr.u_all, tr.u_k, tr.u_d])
