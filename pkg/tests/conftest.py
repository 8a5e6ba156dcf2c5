import json
from datetime import datetime, timezone

import pytest

from polluters.ingest import record_from_dict

_counter = iter(range(1, 10**9))


def tweet(user="A", when="2015-06-01T10:00:00Z", urls=(), city="Melbourne", text="hello",
          hashtags=(), tweet_id=None, verified=False, followers=100, friends=50,
          screen_name=None, display_name=None, created="2012-01-01T00:00:00Z"):
    """Build a raw record dict in the input schema."""
    return {
        "tweet_id": tweet_id or f"t{next(_counter)}",
        "user_id": user,
        "created_at": when,
        "text": text,
        "urls": list(urls),
        "hashtags": list(hashtags),
        "city": city,
        "user": {
            "screen_name": screen_name if screen_name is not None else f"{user}_screen",
            "display_name": display_name if display_name is not None else user,
            "followers_count": followers,
            "friends_count": friends,
            "verified": verified,
            "account_created_at": created,
        },
    }


def rec(**kw):
    return record_from_dict(tweet(**kw))


def write_jsonl(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        for r in rows:
            fh.write((r if isinstance(r, str) else json.dumps(r)) + "\n")
    return path


@pytest.fixture
def utc():
    return timezone.utc


@pytest.fixture
def as_of():
    return datetime(2017, 1, 1, tzinfo=timezone.utc)
