"""Fixed-offset local time arithmetic shared by all pipeline stages.

All timestamps are stored internally as UTC epoch seconds truncated to 10 s.
Local civil time is a configurable fixed UTC offset per dataset (no DST
transitions inside a one-month observation window), so day/second-of-day
splits are plain integer arithmetic and safe to vectorize.
"""

from __future__ import annotations

import datetime as dt

import numpy as np

TICK_SECONDS = 10
DAY_SECONDS = 86_400
BIN_SECONDS = 600          # 10-minute activity bins
BINS_PER_DAY = DAY_SECONDS // BIN_SECONDS  # 144

#: Budapest, April 2017 (CEST, DST already in effect).
DEFAULT_TZ_OFFSET_MINUTES = 120


def truncate_tick(ts: int) -> int:
    """Truncate an epoch-second timestamp down to the nearest 10 s."""
    return ts - ts % TICK_SECONDS


def parse_timestamp(value: str, tz_offset_minutes: int) -> int:
    """Parse one timestamp cell into truncated UTC epoch seconds.

    Integer content is taken as epoch seconds; anything else must be
    ISO-8601. Naive ISO values are interpreted as local wall time at the
    dataset's fixed UTC offset; values carrying their own offset keep it.

    Raises ValueError for unparseable content.
    """
    text = value.strip()
    if not text:
        raise ValueError("empty timestamp")
    try:
        return truncate_tick(int(text))
    except ValueError:
        pass
    stamp = dt.datetime.fromisoformat(text)
    if stamp.tzinfo is None:
        stamp = stamp.replace(tzinfo=dt.timezone(dt.timedelta(minutes=tz_offset_minutes)))
    return truncate_tick(int(stamp.timestamp()))


def local_day(ts: np.ndarray | int, tz_offset_minutes: int):
    """Local civil day index (days since 1970-01-01 in local time)."""
    return (np.asarray(ts) + tz_offset_minutes * 60) // DAY_SECONDS


def local_seconds_of_day(ts: np.ndarray | int, tz_offset_minutes: int):
    """Seconds since local midnight."""
    return (np.asarray(ts) + tz_offset_minutes * 60) % DAY_SECONDS


def day_to_date(day_index: int) -> dt.date:
    return dt.date(1970, 1, 1) + dt.timedelta(days=int(day_index))


def date_to_day(date: dt.date) -> int:
    return (date - dt.date(1970, 1, 1)).days


def weekday_monday0(day_index: np.ndarray | int):
    """ISO weekday as 0..6 with Monday = 0 (1970-01-01 was a Thursday)."""
    return (np.asarray(day_index) + 3) % 7


def parse_date(text: str) -> int:
    """ISO date string -> local day index (days since 1970-01-01)."""
    return date_to_day(dt.date.fromisoformat(text))
