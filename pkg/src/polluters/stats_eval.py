"""Corpus statistics, significance tests, and summaries of external
evaluation files (account status snapshots, third-party bot scores,
hand-labelled accounts)."""

from __future__ import annotations

import csv
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

from scipy.special import betainc

from .ingest import CITIES, TweetRecord

logger = logging.getLogger(__name__)

BOT = "bot"
LEGIT = "legitimate"

SUSPENDED = "suspended"
DELETED = "deleted"
ACTIVE = "active"
STATUS_CODES = {63: SUSPENDED, 50: DELETED}


class EvalFileError(ValueError):
    """Malformed evaluation input; the message carries the line number."""


# -- corpus statistics ------------------------------------------------------


@dataclass
class CityStats:
    tweet_count: int = 0
    unique_user_count: int = 0
    unique_url_count: int = 0
    mean_followers: float = 0.0
    mean_friends: float = 0.0
    verified_count: int = 0


def dataset_stats(records: Iterable[TweetRecord]) -> dict[str, CityStats]:
    """Per-city counts; user-level figures use each user's last snapshot."""
    tweets: Counter = Counter()
    users: dict[str, set[str]] = {c: set() for c in CITIES}
    urls: dict[str, set[str]] = {c: set() for c in CITIES}
    snapshot = {}
    for rec in records:
        tweets[rec.city] += 1
        users[rec.city].add(rec.user_id)
        urls[rec.city].update(rec.urls)
        snapshot[rec.user_id] = rec.user
    out = {}
    for city in CITIES:
        members = users[city]
        n = len(members)
        snaps = [snapshot[u] for u in members]
        out[city] = CityStats(
            tweet_count=tweets[city],
            unique_user_count=n,
            unique_url_count=len(urls[city]),
            mean_followers=sum(s.followers_count for s in snaps) / n if n else 0.0,
            mean_friends=sum(s.friends_count for s in snaps) / n if n else 0.0,
            verified_count=sum(1 for s in snaps if s.verified),
        )
    return out


def write_dataset_stats(stats: dict[str, CityStats], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["city", "tweet_count", "unique_user_count", "unique_url_count",
                    "mean_followers", "mean_friends", "verified_count"])
        for city, s in stats.items():
            w.writerow([city, s.tweet_count, s.unique_user_count, s.unique_url_count,
                        f"{s.mean_followers:.3f}", f"{s.mean_friends:.3f}", s.verified_count])


# -- labelled accounts and significance ---------------------------------------


@dataclass(frozen=True)
class LabelledAccount:
    user_id: str
    human_label: str
    predicted_label: str


def majority_label(votes: Sequence[str]) -> str | None:
    """The label at least two of three labellers gave, else None."""
    counts = Counter(v for v in votes if v in (BOT, LEGIT))
    for label, c in counts.items():
        if c >= 2:
            return label
    return None


def load_labelled(path: str | Path) -> tuple[list[LabelledAccount], int]:
    """Read ``user_id,label_1,label_2,label_3,predicted``.

    Labels other than ``bot``/``legitimate`` (blank, ``unsure``) count as
    abstentions. Rows without a two-of-three majority are dropped and
    counted.
    """
    out: list[LabelledAccount] = []
    dropped = 0
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        expected = ["user_id", "label_1", "label_2", "label_3", "predicted"]
        if reader.fieldnames != expected:
            raise EvalFileError(f"{path}:1: expected header {','.join(expected)}")
        for line_no, row in enumerate(reader, start=2):
            pred = (row["predicted"] or "").strip().lower()
            if pred not in (BOT, LEGIT):
                raise EvalFileError(f"{path}:{line_no}: bad predicted label {row['predicted']!r}")
            votes = [(row[k] or "").strip().lower() for k in ("label_1", "label_2", "label_3")]
            human = majority_label(votes)
            if human is None:
                dropped += 1
                continue
            out.append(LabelledAccount(row["user_id"], human, pred))
    return out, dropped


def accuracy(labels: Sequence[LabelledAccount]) -> float:
    if not labels:
        raise ValueError("accuracy of an empty label set is undefined")
    return sum(1 for a in labels if a.human_label == a.predicted_label) / len(labels)


def _logsumexp(xs: list[float]) -> float:
    top = max(xs)
    return top + math.log(math.fsum(math.exp(x - top) for x in xs))


def binomial_significance(successes: int, trials: int, null_p: float = 0.5) -> float:
    """Exact one-sided P[X >= successes] for X ~ Binomial(trials, null_p)."""
    if not (0 <= successes <= trials):
        raise ValueError("need 0 <= successes <= trials")
    if not (0.0 < null_p < 1.0):
        raise ValueError("null_p must lie strictly between 0 and 1")
    if successes == 0:
        return 1.0
    lp, lq = math.log(null_p), math.log1p(-null_p)
    lg = math.lgamma
    terms = [
        lg(trials + 1) - lg(i + 1) - lg(trials - i + 1) + i * lp + (trials - i) * lq
        for i in range(successes, trials + 1)
    ]
    return min(1.0, math.exp(_logsumexp(terms)))


def t_sf(t: float, df: float) -> float:
    """Upper tail P[T > t] of Student's t."""
    x = df / (df + t * t)
    tail = 0.5 * float(betainc(df / 2.0, 0.5, x))
    return tail if t >= 0 else 1.0 - tail


class WelchResult(NamedTuple):
    t_statistic: float
    p_value: float
    df: float


def _mean_var(xs: Sequence[float]) -> tuple[float, float]:
    n = len(xs)
    mean = math.fsum(xs) / n
    return mean, math.fsum((x - mean) ** 2 for x in xs) / (n - 1)


def welch_t_test(sample_a: Sequence[float], sample_b: Sequence[float]) -> WelchResult:
    """Two-sided Welch t test with Welch-Satterthwaite degrees of freedom."""
    if len(sample_a) < 2 or len(sample_b) < 2:
        raise ValueError("each sample needs at least two observations")
    ma, va = _mean_var(sample_a)
    mb, vb = _mean_var(sample_b)
    if va == 0 or vb == 0:
        raise ValueError("samples must have nonzero variance")
    sa, sb = va / len(sample_a), vb / len(sample_b)
    t = (ma - mb) / math.sqrt(sa + sb)
    df = (sa + sb) ** 2 / (sa**2 / (len(sample_a) - 1) + sb**2 / (len(sample_b) - 1))
    p = min(1.0, 2.0 * t_sf(abs(t), df))
    return WelchResult(t, p, df)


def proportion_t_test(successes: int, trials: int, null_p: float = 0.5) -> WelchResult:
    """One-sample, one-sided t test of a 0/1 agreement vector against null_p.

    Kept alongside the exact binomial test for comparison with analyses
    that ran a t test on accuracy; the returned ``df`` is ``trials - 1``.
    """
    if trials < 2 or not (0 <= successes <= trials):
        raise ValueError("need trials >= 2 and 0 <= successes <= trials")
    mean = successes / trials
    var = (successes * (1 - mean) ** 2 + (trials - successes) * mean**2) / (trials - 1)
    if var == 0:
        raise ValueError("agreement vector has zero variance")
    t = (mean - null_p) / math.sqrt(var / trials)
    return WelchResult(t, t_sf(t, trials - 1), float(trials - 1))


# -- account status snapshots -------------------------------------------------


@dataclass(frozen=True)
class AccountStatus:
    user_id: str
    status: str
    raw_code: int | None = None


@dataclass
class StatusSummary:
    suspended_count: int = 0
    deleted_count: int = 0
    active_count: int = 0
    unmatched_count: int = 0  # flagged accounts absent from the status file


def load_statuses(path: str | Path) -> dict[str, AccountStatus]:
    out = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["user_id", "code"]:
            raise EvalFileError(f"{path}:1: expected header user_id,code")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2 or not row[0]:
                raise EvalFileError(f"{path}:{line_no}: expected 2 fields")
            user, raw = row[0], row[1].strip()
            if raw == "":
                out[user] = AccountStatus(user, ACTIVE, None)
                continue
            try:
                code = int(raw)
            except ValueError:
                raise EvalFileError(f"{path}:{line_no}: unknown status code {raw!r}")
            if code not in STATUS_CODES:
                raise EvalFileError(f"{path}:{line_no}: unknown status code {code}")
            out[user] = AccountStatus(user, STATUS_CODES[code], code)
    return out


def account_status_report(statuses: dict[str, AccountStatus], flagged: Iterable[str]) -> StatusSummary:
    s = StatusSummary()
    for u in set(flagged):
        st = statuses.get(u)
        if st is None:
            s.unmatched_count += 1
        elif st.status == SUSPENDED:
            s.suspended_count += 1
        elif st.status == DELETED:
            s.deleted_count += 1
        else:
            s.active_count += 1
    return s


# -- external bot scores -------------------------------------------------------


def load_scores(path: str | Path) -> tuple[dict[str, float], list[tuple[int, str]]]:
    """Read ``user_id,score``; out-of-range or unparseable rows are rejected
    and returned with their line numbers."""
    scores: dict[str, float] = {}
    rejected: list[tuple[int, str]] = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return scores, rejected
        if header != ["user_id", "score"]:
            raise EvalFileError(f"{path}:1: expected header user_id,score")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                value = float(row[1])
            except (IndexError, ValueError):
                rejected.append((line_no, f"unparseable row {row!r}"))
                continue
            if not (0.0 <= value <= 1.0):
                rejected.append((line_no, f"score {value} outside [0, 1]"))
                continue
            scores[row[0]] = value
    for line_no, reason in rejected:
        logger.warning("%s:%d: %s", path, line_no, reason)
    return scores, rejected


@dataclass
class ScoreGroup:
    count: int = 0
    fraction_above_half: float | None = None
    mean: float | None = None
    sd: float | None = None


@dataclass
class ExternalScoreSummary:
    coverage: int = 0
    zero_coverage: bool = True
    mean: float | None = None
    sd: float | None = None
    true_positives: ScoreGroup = field(default_factory=ScoreGroup)
    false_positives: ScoreGroup = field(default_factory=ScoreGroup)


def _sample_sd(xs: Sequence[float]) -> float:
    if len(xs) < 2:
        return 0.0
    return math.sqrt(_mean_var(xs)[1])


def _group(values: list[float]) -> ScoreGroup:
    if not values:
        return ScoreGroup()
    return ScoreGroup(
        count=len(values),
        fraction_above_half=sum(1 for v in values if v > 0.5) / len(values),
        mean=math.fsum(values) / len(values),
        sd=_sample_sd(values),
    )


def summarize_external_scores(
    scores: dict[str, float],
    flagged: Iterable[str],
    labelled: Sequence[LabelledAccount] = (),
) -> ExternalScoreSummary:
    """Summarize third-party bot scores over our flagged accounts.

    A true positive is a flagged account the human majority called a bot;
    a false positive is a flagged account they called legitimate.
    """
    flagged = set(flagged)
    for u, v in scores.items():
        if not (0.0 <= v <= 1.0):
            raise ValueError(f"score for {u} outside [0, 1]")
    covered = [scores[u] for u in sorted(flagged) if u in scores]
    summary = ExternalScoreSummary(coverage=len(covered), zero_coverage=not covered)
    if covered:
        summary.mean = math.fsum(covered) / len(covered)
        summary.sd = _sample_sd(covered)
    tp = [scores[a.user_id] for a in labelled
          if a.user_id in flagged and a.human_label == BOT and a.user_id in scores]
    fp = [scores[a.user_id] for a in labelled
          if a.user_id in flagged and a.human_label == LEGIT and a.user_id in scores]
    summary.true_positives = _group(tp)
    summary.false_positives = _group(fp)
    return summary
