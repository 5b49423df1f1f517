"""Day classification and home/work cell inference.

A sim's work cell is the one it uses most between 09:00 and 16:00 local
time on workdays; the home cell is the one it uses most between 22:00
and 06:00 on workdays plus any time on holidays. Weekends count as
holidays, public holidays are configured, and swapped working Saturdays
can be forced back to workdays via overrides.

Ties are broken by the larger all-day record count in the candidate
cell, then by the lexicographically smaller cell id. All intervals are
half-open: a record at exactly 06:00 is in neither window, one at 22:00
is in the home window.
"""

from __future__ import annotations

import datetime as dt
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np

from . import timebase
from .tables import ActivityTable

WORKDAY = "workday"
HOLIDAY = "holiday"

WORK_START_S = 9 * 3600
WORK_END_S = 16 * 3600
HOME_EVENING_S = 22 * 3600
HOME_MORNING_S = 6 * 3600

DateLike = Union[str, dt.date, int]


def _to_day(value: DateLike) -> int:
    if isinstance(value, int):
        return value
    if isinstance(value, dt.date):
        return timebase.date_to_day(value.year, value.month, value.day)
    return timebase.parse_date(value)


@dataclass
class Calendar:
    """Classifies local days of the observation period as workday or holiday."""

    start_day: int
    end_day: int  # inclusive
    tz_offset_minutes: int = timebase.DEFAULT_TZ_OFFSET_MINUTES
    holidays: frozenset = frozenset()
    workday_overrides: frozenset = frozenset()

    def __post_init__(self):
        if self.end_day < self.start_day:
            raise ValueError("calendar range is empty")

    def in_range(self, day: int) -> bool:
        return self.start_day <= day <= self.end_day

    def classify(self, day: DateLike) -> str:
        day = _to_day(day)
        if not self.in_range(day):
            raise ValueError(
                f"date {timebase.day_to_date(day)} outside calendar range "
                f"{timebase.day_to_date(self.start_day)}..{timebase.day_to_date(self.end_day)}"
            )
        if day in self.workday_overrides:
            return WORKDAY
        if day in self.holidays:
            return HOLIDAY
        if timebase.weekday_monday0(day) >= 5:
            return HOLIDAY
        return WORKDAY

    def holiday_mask(self, days: np.ndarray) -> np.ndarray:
        """Vectorized classify: True where holiday. Errors on out-of-range days."""
        days = np.asarray(days, dtype=np.int64)
        if len(days) and (days.min() < self.start_day or days.max() > self.end_day):
            n_out = int(((days < self.start_day) | (days > self.end_day)).sum())
            raise ValueError(f"{n_out} record day(s) outside calendar range")
        mask = np.isin(days, np.fromiter(self.holidays, dtype=np.int64, count=len(self.holidays)))
        mask |= timebase.weekday_monday0(days) >= 5
        if self.workday_overrides:
            mask &= ~np.isin(
                days, np.fromiter(self.workday_overrides, dtype=np.int64, count=len(self.workday_overrides))
            )
        return mask

    def days(self) -> range:
        return range(self.start_day, self.end_day + 1)

    def workdays(self) -> list[int]:
        return [d for d in self.days() if self.classify(d) == WORKDAY]

    def holidays_in_range(self) -> list[int]:
        return [d for d in self.days() if self.classify(d) == HOLIDAY]

    @classmethod
    def from_json(
        cls,
        path: Union[str, Path],
        default_range: Optional[tuple] = None,
    ) -> "Calendar":
        """Load a calendar file.

        The file needs only tz_offset_minutes/holidays/workday_overrides;
        when it omits start_date/end_date the ``default_range`` day pair
        (usually the observed data span) supplies the coverage window.
        """
        with open(path) as fh:
            raw = json.load(fh)
        if "start_date" in raw and "end_date" in raw:
            start, end = timebase.parse_date(raw["start_date"]), timebase.parse_date(raw["end_date"])
        elif default_range is not None:
            start, end = int(default_range[0]), int(default_range[1])
        else:
            raise ValueError(
                "calendar file lacks start_date/end_date and no default range was given"
            )
        return cls(
            start_day=start,
            end_day=end,
            tz_offset_minutes=int(raw.get("tz_offset_minutes", timebase.DEFAULT_TZ_OFFSET_MINUTES)),
            holidays=frozenset(timebase.parse_date(d) for d in raw.get("holidays", ())),
            workday_overrides=frozenset(timebase.parse_date(d) for d in raw.get("workday_overrides", ())),
        )

    def to_json(self, path: Union[str, Path]) -> None:
        payload = {
            "tz_offset_minutes": self.tz_offset_minutes,
            "start_date": str(timebase.day_to_date(self.start_day)),
            "end_date": str(timebase.day_to_date(self.end_day)),
            "holidays": [str(timebase.day_to_date(d)) for d in sorted(self.holidays)],
            "workday_overrides": [str(timebase.day_to_date(d)) for d in sorted(self.workday_overrides)],
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")


def classify_day(date: DateLike, calendar: Calendar) -> str:
    return calendar.classify(date)


@dataclass
class LocationAssignment:
    sim_id: str
    home_cell: Optional[str] = None
    work_cell: Optional[str] = None
    home_support: int = 0
    work_support: int = 0


def _qualifying_work(sod: int, holiday: bool) -> bool:
    return (not holiday) and WORK_START_S <= sod < WORK_END_S


def _qualifying_home(sod: int, holiday: bool) -> bool:
    return holiday or sod >= HOME_EVENING_S or sod < HOME_MORNING_S


def _most_frequent(
    records: Iterable[Tuple[int, str]],
    calendar: Calendar,
    qualifies,
) -> Tuple[Optional[str], int]:
    qual: dict[str, int] = {}
    all_day: dict[str, int] = {}
    off = calendar.tz_offset_minutes
    for ts, cell in records:
        day = timebase.local_day(ts, off)
        sod = timebase.local_seconds_of_day(ts, off)
        holiday = calendar.classify(int(day)) == HOLIDAY
        all_day[cell] = all_day.get(cell, 0) + 1
        if qualifies(int(sod), holiday):
            qual[cell] = qual.get(cell, 0) + 1
    if not qual:
        return None, 0
    best = min(qual, key=lambda c: (-qual[c], -all_day[c], c))
    return best, qual[best]


def infer_work(records: Iterable[Tuple[int, str]], calendar: Calendar) -> Tuple[Optional[str], int]:
    """Reference per-sim work inference over (timestamp, cell_id) pairs."""
    return _most_frequent(records, calendar, _qualifying_work)


def infer_home(records: Iterable[Tuple[int, str]], calendar: Calendar) -> Tuple[Optional[str], int]:
    """Reference per-sim home inference over (timestamp, cell_id) pairs."""
    return _most_frequent(records, calendar, _qualifying_home)


@dataclass
class LocationTable:
    """Per-sim home/work assignments aligned to an ActivityTable's sim pool.

    Codes index the activity table's cell pool; -1 means no qualifying
    records, so no assignment.
    """

    sim_ids: np.ndarray
    cell_ids: np.ndarray
    home_code: np.ndarray
    home_support: np.ndarray
    work_code: np.ndarray
    work_support: np.ndarray

    def __len__(self) -> int:
        return len(self.sim_ids)

    def assignment(self, i: int) -> LocationAssignment:
        return LocationAssignment(
            sim_id=str(self.sim_ids[i]),
            home_cell=str(self.cell_ids[self.home_code[i]]) if self.home_code[i] >= 0 else None,
            work_cell=str(self.cell_ids[self.work_code[i]]) if self.work_code[i] >= 0 else None,
            home_support=int(self.home_support[i]),
            work_support=int(self.work_support[i]),
        )

    def with_min_support(self, min_home: int = 0, min_work: int = 0) -> "LocationTable":
        """Copy with assignments under the support floors dropped (code -1)."""
        home = np.where(self.home_support >= min_home, self.home_code, -1)
        work = np.where(self.work_support >= min_work, self.work_code, -1)
        return LocationTable(
            sim_ids=self.sim_ids,
            cell_ids=self.cell_ids,
            home_code=home.astype(self.home_code.dtype),
            home_support=self.home_support,
            work_code=work.astype(self.work_code.dtype),
            work_support=self.work_support,
        )

    def to_csv(self, path: Union[str, Path]) -> None:
        with open(path, "w") as fh:
            fh.write("sim_id,home_cell,home_support,work_cell,work_support\n")
            for i in range(len(self.sim_ids)):
                hc = self.cell_ids[self.home_code[i]] if self.home_code[i] >= 0 else ""
                wc = self.cell_ids[self.work_code[i]] if self.work_code[i] >= 0 else ""
                hs = self.home_support[i] if self.home_code[i] >= 0 else ""
                ws = self.work_support[i] if self.work_code[i] >= 0 else ""
                fh.write(f"{self.sim_ids[i]},{hc},{hs},{wc},{ws}\n")

    @classmethod
    def from_csv(cls, path: Union[str, Path], table: ActivityTable) -> "LocationTable":
        """Reload against the pools of ``table`` (ids must match its pools)."""
        import csv as _csv

        cell_rank = {c: i for i, c in enumerate(table.cell_ids)}
        sim_rank = {s: i for i, s in enumerate(table.sim_ids)}
        n = table.n_sims
        home_code = np.full(n, -1, dtype=np.int32)
        work_code = np.full(n, -1, dtype=np.int32)
        home_support = np.zeros(n, dtype=np.int64)
        work_support = np.zeros(n, dtype=np.int64)
        with open(path) as fh:
            for row in _csv.DictReader(fh):
                i = sim_rank.get(row["sim_id"])
                if i is None:
                    continue
                if row["home_cell"]:
                    home_code[i] = cell_rank[row["home_cell"]]
                    home_support[i] = int(row["home_support"])
                if row["work_cell"]:
                    work_code[i] = cell_rank[row["work_cell"]]
                    work_support[i] = int(row["work_support"])
        return cls(
            sim_ids=table.sim_ids,
            cell_ids=table.cell_ids,
            home_code=home_code,
            home_support=home_support,
            work_code=work_code,
            work_support=work_support,
        )


def clip_to_calendar(table: ActivityTable, calendar: Calendar) -> tuple[ActivityTable, int]:
    """Drop records outside the calendar range; return (table, n_dropped)."""
    days = table.local_days()
    keep = (days >= calendar.start_day) & (days <= calendar.end_day)
    dropped = int(len(keep) - keep.sum())
    return (table.take(keep) if dropped else table), dropped


def _segment_winner(
    sims_u: np.ndarray,
    cells_u: np.ndarray,
    qual_cnt: np.ndarray,
    all_cnt: np.ndarray,
    n_sims: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Per sim: cell maximizing (qual, all-day, smaller cell code)."""
    order = np.lexsort((cells_u, -all_cnt, -qual_cnt, sims_u))
    s = sims_u[order]
    first = np.empty(len(order), dtype=bool)
    first[0] = True
    first[1:] = s[1:] != s[:-1]
    rows = order[first]
    code = np.full(n_sims, -1, dtype=np.int32)
    support = np.zeros(n_sims, dtype=np.int64)
    winners = qual_cnt[rows] > 0
    rows = rows[winners]
    code[sims_u[rows]] = cells_u[rows].astype(np.int32)
    support[sims_u[rows]] = qual_cnt[rows]
    return code, support


def infer_locations(table: ActivityTable, calendar: Calendar) -> LocationTable:
    """Vectorized home/work inference for every sim in the table."""
    n_sims, n_cells = table.n_sims, table.n_cells
    if len(table) == 0:
        empty_code = np.full(n_sims, -1, dtype=np.int32)
        zeros = np.zeros(n_sims, dtype=np.int64)
        return LocationTable(table.sim_ids, table.cell_ids, empty_code, zeros, empty_code.copy(), zeros.copy())

    days = table.local_days()
    sod = table.local_seconds()
    holiday = calendar.holiday_mask(days)
    work_qual = (~holiday) & (sod >= WORK_START_S) & (sod < WORK_END_S)
    home_qual = holiday | (sod >= HOME_EVENING_S) | ((~holiday) & (sod < HOME_MORNING_S))

    key = table.sim_codes.astype(np.int64) * n_cells + table.cell_codes
    uniq, inv = np.unique(key, return_inverse=True)
    all_cnt = np.bincount(inv, minlength=len(uniq))
    work_cnt = np.bincount(inv[work_qual], minlength=len(uniq))
    home_cnt = np.bincount(inv[home_qual], minlength=len(uniq))
    sims_u = (uniq // n_cells).astype(np.int64)
    cells_u = (uniq % n_cells).astype(np.int64)

    work_code, work_support = _segment_winner(sims_u, cells_u, work_cnt, all_cnt, n_sims)
    home_code, home_support = _segment_winner(sims_u, cells_u, home_cnt, all_cnt, n_sims)
    return LocationTable(
        sim_ids=table.sim_ids,
        cell_ids=table.cell_ids,
        home_code=home_code,
        home_support=home_support,
        work_code=work_code,
        work_support=work_support,
    )
