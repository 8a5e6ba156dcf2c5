"""Parsing, validation and canonicalization of line-delimited tweet records."""

from __future__ import annotations

import csv
import json
import logging
import re
from dataclasses import dataclass, field
from datetime import date, datetime, timezone, tzinfo
from pathlib import Path
from typing import IO, Iterable, Iterator
from zoneinfo import ZoneInfo, ZoneInfoNotFoundError

logger = logging.getLogger(__name__)

CITIES = ("Adelaide", "Brisbane", "Melbourne", "Perth", "Sydney", "Australia")

REQUIRED_FIELDS = ("tweet_id", "user_id", "created_at", "text", "city", "user")
USER_FIELDS = (
    "screen_name",
    "display_name",
    "followers_count",
    "friends_count",
    "verified",
    "account_created_at",
)

_URL_IN_TEXT = re.compile(r"(?:https?://|www\.)\S+", re.IGNORECASE)
_HASHTAG_IN_TEXT = re.compile(r"#(\w+)", re.UNICODE)
_HOST = re.compile(
    r"^(?:[a-z0-9](?:[a-z0-9-]{0,61}[a-z0-9])?\.)+[a-z]{2,63}(?::\d{1,5})?$"
)


class ConfigError(ValueError):
    """Invalid run configuration (bad timezone, missing calendar, ...)."""


class InvalidURL(ValueError):
    pass


class CalendarError(ValueError):
    """Malformed event calendar file."""


class SourceError(OSError):
    """The record source could not be opened or read."""


@dataclass(frozen=True)
class UserSnapshot:
    screen_name: str
    display_name: str
    followers_count: int
    friends_count: int
    verified: bool
    account_created_at: datetime


@dataclass(frozen=True)
class TweetRecord:
    tweet_id: str
    user_id: str
    created_at: datetime
    text: str
    urls: tuple[str, ...]
    hashtags: tuple[str, ...]
    city: str
    user: UserSnapshot
    # raw URL strings that had no recognizable host; they still make the
    # tweet URL-bearing, but are attributed to no specific URL
    unresolved_urls: tuple[str, ...] = ()

    @property
    def has_url(self) -> bool:
        return bool(self.urls or self.unresolved_urls)

    @property
    def distinct_urls(self) -> frozenset[str]:
        return frozenset(self.urls)


@dataclass
class IngestConfig:
    tz: str = "UTC"
    dedupe: bool = True
    since: datetime | None = None
    until: datetime | None = None


@dataclass
class ParseErrorLog:
    entries: list[tuple[int, str]] = field(default_factory=list)

    def add(self, line_no: int, reason: str) -> None:
        self.entries.append((line_no, reason))

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def lines(self) -> list[int]:
        return [n for n, _ in self.entries]

    def write(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            for line_no, reason in self.entries:
                fh.write(f"{line_no}\t{reason}\n")


class RecordError(ValueError):
    """A single record failed validation; message names the offending field."""


def canonicalize_url(raw: str) -> str:
    """Reduce a URL to ``host[/path]``.

    Scheme, userinfo, query string and fragment are dropped, the host is
    lowercased and trailing slashes are removed. The path keeps its case.

    >>> canonicalize_url("HTTP://Example.COM/a/")
    'example.com/a'
    """
    if not raw or not raw.strip():
        raise InvalidURL("empty URL")
    s = raw.strip()
    if any(c.isspace() for c in s):
        raise InvalidURL(f"no recognizable host in {raw!r}")
    m = re.match(r"^[a-zA-Z][a-zA-Z0-9+.-]*://", s)
    if m:
        s = s[m.end():]
    elif s.startswith("//"):
        s = s[2:]
    s = re.split(r"[?#]", s, maxsplit=1)[0]
    host, sep, path = s.partition("/")
    if "@" in host:
        host = host.rsplit("@", 1)[1]
    host = host.lower().rstrip(".")
    if not _HOST.match(host):
        raise InvalidURL(f"no recognizable host in {raw!r}")
    path = path.rstrip("/")
    return f"{host}/{path}" if path else host


def resolve_tz(name: str | tzinfo) -> tzinfo:
    if isinstance(name, tzinfo):
        return name
    if name.upper() == "UTC":
        return timezone.utc
    try:
        return ZoneInfo(name)
    except (ZoneInfoNotFoundError, ValueError) as exc:
        raise ConfigError(f"unknown timezone {name!r}") from exc


def active_day(record: TweetRecord, tz: str | tzinfo = "UTC") -> date:
    return record.created_at.astimezone(resolve_tz(tz)).date()


def parse_timestamp(value) -> datetime:
    if not isinstance(value, str) or not value:
        raise ValueError(f"not a timestamp: {value!r}")
    s = value.strip()
    if s.endswith(("Z", "z")):
        s = s[:-1] + "+00:00"
    dt = datetime.fromisoformat(s)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc).replace(microsecond=0)


def format_timestamp(dt: datetime) -> str:
    return dt.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _count(user: dict, key: str) -> int:
    v = user[key]
    if isinstance(v, bool) or not isinstance(v, int) or v < 0:
        raise RecordError(f"user.{key}: expected nonnegative integer, got {v!r}")
    return v


def _string_list(obj: dict, key: str) -> list[str] | None:
    v = obj.get(key)
    if v is None:
        return None
    if not isinstance(v, list) or not all(isinstance(x, str) for x in v):
        raise RecordError(f"{key}: expected array of strings")
    return v


def record_from_dict(obj: dict) -> TweetRecord:
    if not isinstance(obj, dict):
        raise RecordError("record is not an object")
    for key in REQUIRED_FIELDS:
        if key not in obj or obj[key] is None:
            raise RecordError(f"missing required field {key}")
    for key in ("tweet_id", "user_id"):
        if not isinstance(obj[key], str) or not obj[key]:
            raise RecordError(f"{key}: expected nonempty string")
    if not isinstance(obj["text"], str):
        raise RecordError("text: expected string")
    if obj["city"] not in CITIES:
        raise RecordError(f"city: unknown city {obj['city']!r}")
    try:
        created = parse_timestamp(obj["created_at"])
    except ValueError:
        raise RecordError(f"created_at: unparseable timestamp {obj['created_at']!r}")

    u = obj["user"]
    if not isinstance(u, dict):
        raise RecordError("user: expected object")
    for key in USER_FIELDS:
        if key not in u or u[key] is None:
            raise RecordError(f"missing required field user.{key}")
    if not isinstance(u["verified"], bool):
        raise RecordError("user.verified: expected boolean")
    for key in ("screen_name", "display_name"):
        if not isinstance(u[key], str):
            raise RecordError(f"user.{key}: expected string")
    try:
        acct = parse_timestamp(u["account_created_at"])
    except ValueError:
        raise RecordError(
            f"user.account_created_at: unparseable timestamp {u['account_created_at']!r}"
        )
    if acct > created:
        raise RecordError("user.account_created_at is after created_at")
    user = UserSnapshot(
        screen_name=u["screen_name"],
        display_name=u["display_name"],
        followers_count=_count(u, "followers_count"),
        friends_count=_count(u, "friends_count"),
        verified=u["verified"],
        account_created_at=acct,
    )

    raw_urls = _string_list(obj, "urls")
    if raw_urls is None:
        raw_urls = _URL_IN_TEXT.findall(obj["text"])
    urls: list[str] = []
    unresolved: list[str] = []
    for raw in raw_urls:
        try:
            urls.append(canonicalize_url(raw))
        except InvalidURL:
            unresolved.append(raw)

    tags = _string_list(obj, "hashtags")
    if tags is None:
        tags = _HASHTAG_IN_TEXT.findall(obj["text"])

    return TweetRecord(
        tweet_id=obj["tweet_id"],
        user_id=obj["user_id"],
        created_at=created,
        text=obj["text"],
        urls=tuple(urls),
        hashtags=tuple(t.lower() for t in tags),
        city=obj["city"],
        user=user,
        unresolved_urls=tuple(unresolved),
    )


def record_to_dict(rec: TweetRecord) -> dict:
    u = rec.user
    return {
        "tweet_id": rec.tweet_id,
        "user_id": rec.user_id,
        "created_at": format_timestamp(rec.created_at),
        "text": rec.text,
        "urls": list(rec.urls) + list(rec.unresolved_urls),
        "hashtags": list(rec.hashtags),
        "city": rec.city,
        "user": {
            "screen_name": u.screen_name,
            "display_name": u.display_name,
            "followers_count": u.followers_count,
            "friends_count": u.friends_count,
            "verified": u.verified,
            "account_created_at": format_timestamp(u.account_created_at),
        },
    }


def serialize(rec: TweetRecord) -> str:
    return json.dumps(record_to_dict(rec), ensure_ascii=False, sort_keys=False)


def _iter_lines(source) -> Iterator[str]:
    if isinstance(source, (str, Path)):
        try:
            fh = open(source, encoding="utf-8")
        except OSError as exc:
            raise SourceError(f"cannot read {source}: {exc}") from exc
        with fh:
            try:
                yield from fh
            except (OSError, UnicodeDecodeError) as exc:
                raise SourceError(f"cannot read {source}: {exc}") from exc
    else:
        yield from source


def parse_stream(
    source: str | Path | IO[str] | Iterable[str],
    config: IngestConfig | None = None,
) -> tuple[list[TweetRecord], ParseErrorLog]:
    """Parse a line-delimited record stream.

    Malformed lines and repeated tweet ids go to the error log with their
    1-based line number; everything else is returned in stream order.
    Blank lines are skipped silently. Records outside the optional
    ``since``/``until`` window are dropped without an error entry.
    """
    config = config or IngestConfig()
    records: list[TweetRecord] = []
    errors = ParseErrorLog()
    seen: set[str] = set()
    for line_no, line in enumerate(_iter_lines(source), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            errors.add(line_no, f"malformed JSON: {exc.msg}")
            continue
        try:
            rec = record_from_dict(obj)
        except RecordError as exc:
            errors.add(line_no, str(exc))
            continue
        if config.dedupe and rec.tweet_id in seen:
            logger.warning("line %d: duplicate tweet_id %s", line_no, rec.tweet_id)
            errors.add(line_no, f"duplicate tweet_id {rec.tweet_id}")
            continue
        seen.add(rec.tweet_id)
        if config.since is not None and rec.created_at < config.since:
            continue
        if config.until is not None and rec.created_at >= config.until:
            continue
        records.append(rec)
    if errors:
        logger.info("%d malformed line(s) skipped", len(errors))
    return records, errors


@dataclass
class EventCalendar:
    entries: dict[str, frozenset[date]] = field(default_factory=dict)

    def dates(self, city: str) -> frozenset[date]:
        return self.entries.get(city, frozenset())

    def __contains__(self, key: tuple[str, date]) -> bool:
        city, day = key
        return day in self.entries.get(city, ())

    def write(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["city", "date"])
            for city in sorted(self.entries):
                for d in sorted(self.entries[city]):
                    w.writerow([city, d.isoformat()])


def load_calendar(path: str | Path) -> EventCalendar:
    entries: dict[str, set[date]] = {}
    try:
        fh = open(path, encoding="utf-8", newline="")
    except OSError as exc:
        raise SourceError(f"cannot read calendar {path}: {exc}") from exc
    with fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["city", "date"]:
            raise CalendarError(f"{path}: expected header 'city,date'")
        for line_no, row in enumerate(reader, start=2):
            city = row["city"].strip()
            if city not in CITIES:
                raise CalendarError(f"{path}:{line_no}: unknown city {city!r}")
            try:
                d = date.fromisoformat(row["date"].strip())
            except (ValueError, AttributeError):
                raise CalendarError(f"{path}:{line_no}: bad date {row['date']!r}")
            entries.setdefault(city, set()).add(d)
    return EventCalendar({c: frozenset(ds) for c, ds in entries.items()})
