"""Labelled synthetic tweet streams with a planted content-polluter ring.

Legitimate users have heavy-tailed (Pareto) activity and draw links from a
large pool with Zipf popularity, so the audiences of legitimate URLs are
unequal and roughly rank-size distributed. Bots post a fixed schedule over
a handful of bot URLs, mostly on a shared set of ring days, so every bot
has (almost) the same diversity score for every bot URL.
"""

from __future__ import annotations

import csv
import json
import random
from bisect import bisect
from dataclasses import asdict, dataclass, field
from datetime import date, datetime, timedelta, timezone
from itertools import accumulate
from pathlib import Path
from statistics import NormalDist

from .ingest import EventCalendar

BOT = "bot"
LEGIT = "legitimate"

# tweet-volume weights from the five city streams of the source corpus
CITY_WEIGHTS = {"Adelaide": 14087, "Brisbane": 5913, "Melbourne": 23720, "Perth": 8421, "Sydney": 31568}

_SYLLABLES = ("ka", "mi", "ro", "tan", "el", "jo", "sa", "ben", "li", "ar", "no", "vi",
              "de", "mar", "us", "ti", "ne", "ol", "ra", "kes", "po", "lu", "an", "sy")
_WORDS = ("rally", "city", "today", "news", "police", "march", "traffic", "council",
          "vote", "protest", "weather", "game", "train", "school", "market", "update")


@dataclass
class SynthConfig:
    seed: int = 0
    n_legit_users: int = 2000
    n_bots: int = 100
    n_bot_urls: int = 5
    legit_url_pool: int = 600
    days: int = 60
    start_date: date = date(2015, 1, 1)
    # day offsets used as event days in every city; None draws event_day_count per city
    event_days: tuple[int, ...] | None = None
    event_day_count: int = 10
    bot_cotweet_rate: float = 0.8
    ring_day_fraction: float = 0.2
    bot_posts_per_url: int = 2
    bot_skip_rate: float = 0.1
    bot_city: str = "Melbourne"
    legit_tweet_rate: float = 0.111
    legit_url_rate: float = 0.6
    activity_exponent: float = 1.2
    url_popularity_exponent: float = 1.0
    verified_rate: float = 0.02
    media_fraction: float = 0.01
    bot_creation_burst: tuple[date, int] = (date(2014, 2, 20), 12)
    burst_size: int = 30
    age_distributions: tuple[tuple[float, float], tuple[float, float]] = ((2.9, 1.0), (4.2, 1.0))

    def validate(self) -> None:
        counts = (self.n_legit_users, self.n_bot_urls, self.legit_url_pool, self.days,
                  self.bot_posts_per_url, self.bot_creation_burst[1])
        if any(c <= 0 for c in counts) or self.n_bots < 0 or self.burst_size < 0:
            raise ValueError("synth counts must be positive")
        for p in (self.bot_cotweet_rate, self.ring_day_fraction, self.bot_skip_rate,
                  self.legit_url_rate, self.verified_rate, self.media_fraction):
            if not 0.0 <= p <= 1.0:
                raise ValueError("synth probabilities must lie in [0, 1]")
        if self.legit_tweet_rate <= 0 or self.activity_exponent <= 1.0:
            raise ValueError("legit_tweet_rate must be > 0 and activity_exponent > 1")
        if self.event_days is not None and any(not 0 <= d < self.days for d in self.event_days):
            raise ValueError("event_days must be offsets within the simulated window")
        if self.bot_city not in CITY_WEIGHTS:
            raise ValueError(f"unknown bot_city {self.bot_city!r}")
        for _, sd in self.age_distributions:
            if sd < 0:
                raise ValueError("age sd must be nonnegative")


@dataclass
class SynthOutput:
    rows: list[dict]
    truth: dict[str, str]
    calendar: EventCalendar
    as_of: datetime
    bot_urls: list[str] = field(default_factory=list)

    @property
    def bot_tweet_fraction(self) -> float:
        if not self.rows:
            return 0.0
        return sum(1 for r in self.rows if self.truth[r["user_id"]] == BOT) / len(self.rows)


def _ts(dt: datetime) -> str:
    return dt.strftime("%Y-%m-%dT%H:%M:%SZ")


def _quantile_ages(n: int, mean: float, sd: float, floor: float, rng: random.Random) -> list[float]:
    # stratified normal draws: sample mean equals ``mean`` exactly before clipping
    nd = NormalDist(mean, sd) if sd > 0 else None
    ages = [max(floor, nd.inv_cdf((i + 0.5) / n) if nd else mean) for i in range(n)]
    rng.shuffle(ages)
    return ages


def _name(rng: random.Random, lo: int = 2, hi: int = 4) -> str:
    return "".join(rng.choice(_SYLLABLES) for _ in range(rng.randint(lo, hi))).capitalize()


def _poisson(rng: random.Random, lam: float) -> int:
    # Knuth for small means, rounded normal approximation above
    if lam > 50:
        return max(0, round(rng.gauss(lam, lam**0.5)))
    threshold, k, p = pow(2.718281828459045, -lam), 0, 1.0
    while True:
        p *= rng.random()
        if p <= threshold:
            return k
        k += 1


def generate_records(config: SynthConfig) -> SynthOutput:
    config.validate()
    rng = random.Random(config.seed)
    start = datetime(config.start_date.year, config.start_date.month, config.start_date.day, tzinfo=timezone.utc)
    as_of = start + timedelta(days=config.days)
    min_age = config.days / 365.25 + 0.05

    n_users = config.n_legit_users + config.n_bots
    ids = [f"u{i:06d}" for i in rng.sample(range(1, 10 * n_users + 1), n_users)]
    legit_ids, bot_ids = ids[: config.n_legit_users], ids[config.n_legit_users:]
    truth = {u: LEGIT for u in legit_ids} | {u: BOT for u in bot_ids}

    cities = sorted(CITY_WEIGHTS)
    city_cum = list(accumulate(CITY_WEIGHTS[c] for c in cities))
    legit_city = {u: cities[bisect(city_cum, rng.random() * city_cum[-1])] for u in legit_ids}

    entries = {}
    for city in cities:
        if config.event_days is not None:
            offs = config.event_days
        else:
            offs = rng.sample(range(config.days), min(config.event_day_count, config.days))
        entries[city] = frozenset(config.start_date + timedelta(days=d) for d in offs)
    calendar = EventCalendar(entries)

    # -- accounts
    users: dict[str, dict] = {}
    (bot_mu, bot_sd), (legit_mu, legit_sd) = config.age_distributions
    activity = [(1.0 - rng.random()) ** (-1.0 / config.activity_exponent) for _ in legit_ids]
    mean_act = sum(activity) / len(activity)
    n_media = round(config.media_fraction * len(legit_ids))
    by_activity = sorted(zip(activity, legit_ids), reverse=True)
    media = {u for _, u in by_activity[:n_media]}
    for u, age in zip(legit_ids, _quantile_ages(len(legit_ids), legit_mu, legit_sd, min_age, rng)):
        name = _name(rng)
        is_media = u in media
        followers = int(rng.lognormvariate(12.0, 1.0)) if is_media else int(rng.lognormvariate(6.0, 1.5))
        users[u] = {
            "screen_name": (name + _name(rng, 1, 2))[:15],
            "display_name": name,
            "followers_count": followers,
            "friends_count": int(rng.lognormvariate(6.5, 1.0)),
            "verified": is_media or rng.random() < config.verified_rate,
            "account_created_at": _ts(as_of - timedelta(seconds=round(age * 365.25 * 86400))),
        }

    burst_day, pool_size = config.bot_creation_burst
    name_pool = [_name(rng, 2, 3) for _ in range(pool_size)]
    burst_dt = datetime(burst_day.year, burst_day.month, burst_day.day, tzinfo=timezone.utc)
    burst_age = (as_of - burst_dt).total_seconds() / 86400 / 365.25
    n_burst = min(config.burst_size, config.n_bots)
    n_rest = config.n_bots - n_burst
    if n_rest:
        rest_mu = (config.n_bots * bot_mu - n_burst * burst_age) / n_rest
        rest_ages = _quantile_ages(n_rest, rest_mu, bot_sd, min_age, rng)
    else:
        rest_ages = []
    for i, u in enumerate(bot_ids):
        name = name_pool[i % pool_size]
        if i < n_burst:
            created = burst_dt + timedelta(seconds=rng.randrange(86400))
        else:
            created = as_of - timedelta(seconds=round(rest_ages[i - n_burst] * 365.25 * 86400))
        users[u] = {
            "screen_name": f"{name}{rng.randrange(10, 100000)}"[:15],
            "display_name": name,
            "followers_count": int(rng.lognormvariate(5.0, 0.8)),
            "friends_count": int(rng.lognormvariate(7.5, 0.5)),
            "verified": False,
            "account_created_at": _ts(created),
        }

    # -- tweets
    pool = [f"https://{['news', 'abc', 'daily', 'herald', 'live', 'watch'][j % 6]}{j % 37}.com.au/story/{j}"
            for j in range(config.legit_url_pool)]
    url_cum = list(accumulate((r + 1) ** -config.url_popularity_exponent for r in range(len(pool))))
    bot_urls = [f"http://shrt.lnk/Qx{j}{''.join(rng.choice('abcdefXYZ') for _ in range(4))}"
                for j in range(config.n_bot_urls)]

    raw: list[tuple[datetime, str, str, str, list[str]]] = []
    for u, act in zip(legit_ids, activity):
        rate = min(act / mean_act * config.legit_tweet_rate, 12.0)
        for _ in range(_poisson(rng, rate * config.days)):
            when = start + timedelta(seconds=rng.randrange(config.days * 86400))
            words = " ".join(rng.choice(_WORDS) for _ in range(rng.randint(3, 8)))
            urls = []
            if rng.random() < config.legit_url_rate:
                urls.append(pool[bisect(url_cum, rng.random() * url_cum[-1])])
            raw.append((when, u, legit_city[u], words, urls))

    n_ring = max(1, round(config.ring_day_fraction * config.days))
    ring_days = rng.sample(range(config.days), n_ring)
    for u in bot_ids:
        posts = [url for url in bot_urls for _ in range(config.bot_posts_per_url)]
        if rng.random() < config.bot_skip_rate:
            posts.pop(rng.randrange(len(posts)))
        for url in posts:
            if rng.random() < config.bot_cotweet_rate:
                day = rng.choice(ring_days)
                secs = 9 * 3600 + rng.randrange(4) * 3600 + rng.randrange(600)
            else:
                day = rng.randrange(config.days)
                secs = rng.randrange(86400)
            when = start + timedelta(days=day, seconds=secs)
            raw.append((when, u, config.bot_city, "Must read before the rally", [url]))

    raw.sort(key=lambda t: (t[0], t[1]))
    rows = []
    for i, (when, u, city, text, urls) in enumerate(raw, start=1):
        tags = sorted({w for w in text.lower().split() if w in ("rally", "protest", "march")})
        rows.append({
            "tweet_id": f"t{i:07d}",
            "user_id": u,
            "created_at": _ts(when),
            "text": (text + " " + " ".join(urls)).strip(),
            "urls": urls,
            "hashtags": tags,
            "city": city,
            "user": users[u],
        })
    canonical_bot_urls = [url.split("://", 1)[1] for url in bot_urls]
    return SynthOutput(rows, truth, calendar, as_of, canonical_bot_urls)


def write_truth(truth: dict[str, str], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["user_id", "label"])
        for u in sorted(truth):
            w.writerow([u, truth[u]])


def load_truth(path: str | Path) -> dict[str, str]:
    with open(path, encoding="utf-8", newline="") as fh:
        return {row["user_id"]: row["label"] for row in csv.DictReader(fh)}


def generate(config: SynthConfig, out_dir: str | Path) -> dict[str, Path]:
    """Write ``tweets.jsonl``, ``ground_truth.csv`` and ``calendar.csv``."""
    out = generate_records(config)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "tweets": out_dir / "tweets.jsonl",
        "truth": out_dir / "ground_truth.csv",
        "calendar": out_dir / "calendar.csv",
    }
    with open(paths["tweets"], "w", encoding="utf-8", newline="\n") as fh:
        for row in out.rows:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")
    write_truth(out.truth, paths["truth"])
    out.calendar.write(paths["calendar"])
    return paths


def config_dict(config: SynthConfig) -> dict:
    d = asdict(config)
    d["start_date"] = config.start_date.isoformat()
    d["bot_creation_burst"] = [config.bot_creation_burst[0].isoformat(), config.bot_creation_burst[1]]
    return d
