"""Circadian indicator extraction from binned activity.

Activity is counted into 144 ten-minute bins per local day, per group.
Groups come in three flavors: records located in an area (cell_based),
all records of sims living in an area (inhabitant_based), and all
records of sims working in an area (worker_based). A centered moving
average smooths each group's month-long series, and wake-up/bedtime are
read off as threshold crossings of the half-range level

    m = (a_max - a_min) * 0.5 + a_min

with linear interpolation between the bracketing bin midpoints. Bedtime
may fall past midnight, so its search window extends into the next
morning and bed minutes can exceed 1440.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from . import timebase
from .locations import Calendar, LocationTable
from .tables import ActivityTable

BINS = timebase.BINS_PER_DAY          # 144
BIN_MINUTES = 10
BIN_MIDPOINT = 5.0                    # minutes past the bin start

CELL_BASED = "cell_based"
INHABITANT_BASED = "inhabitant_based"
WORKER_BASED = "worker_based"
MODES = (CELL_BASED, INHABITANT_BASED, WORKER_BASED)


@dataclass
class BinnedActivity:
    """Per-group, per-day activity counts in 10-minute bins.

    counts has shape (n_groups, n_days, 144); day d is local day
    day0 + d. skipped counts records that could not be attributed (no
    home/work assignment, or a cell with no site).
    """

    kind: str
    level: str                # "cell" | "site" | "all"
    group_ids: np.ndarray
    day0: int
    counts: np.ndarray
    tz_offset_minutes: int
    skipped: int = 0

    @property
    def n_groups(self) -> int:
        return self.counts.shape[0]

    @property
    def n_days(self) -> int:
        return self.counts.shape[1]

    def total(self) -> int:
        return int(self.counts.sum())

    def group_index(self, group_id: str) -> int:
        hits = np.nonzero(self.group_ids == group_id)[0]
        if len(hits) == 0:
            raise KeyError(group_id)
        return int(hits[0])

    def smooth(self, window: int = 12) -> np.ndarray:
        """Moving average over each group's month-long flattened series."""
        g, d, b = self.counts.shape
        flat = self.counts.reshape(g, d * b).astype(float)
        return smooth_flat(flat, window).reshape(g, d, b)


def smooth_flat(series: np.ndarray, window: int = 12) -> np.ndarray:
    """Centered moving average along the last axis, windows clipped at the ends.

    For window w the bin at index i averages indices [i - (w-1)//2, i + w//2]
    intersected with the valid range; interior bins therefore see exactly w
    samples and edge bins a shrunken window. Even windows are right-centered:
    bins carry midpoint time labels, so the window around bin i spans
    [t_i - w/2*10 - 5, t_i + w/2*10 + 5) and the label sits half a bin left of
    the window center, which keeps labeled crossing times from lagging the
    underlying signal.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    arr = np.asarray(series, dtype=float)
    squeeze = arr.ndim == 1
    if squeeze:
        arr = arr[None, :]
    n = arr.shape[-1]
    back = (window - 1) // 2
    fwd = window - back
    lo = np.clip(np.arange(n) - back, 0, n)
    hi = np.clip(np.arange(n) + fwd, 0, n)
    css = np.cumsum(arr, axis=-1, dtype=float)
    css = np.concatenate([np.zeros(arr.shape[:-1] + (1,)), css], axis=-1)
    out = (css[..., hi] - css[..., lo]) / (hi - lo)
    return out[0] if squeeze else out


def smooth_series(
    day_bins: Sequence[float],
    window: int = 12,
    prev_day: Optional[Sequence[float]] = None,
    next_day: Optional[Sequence[float]] = None,
) -> np.ndarray:
    """Smooth one day's 144 bins, using neighbor days as context when given."""
    day = np.asarray(day_bins, dtype=float)
    if day.shape != (BINS,):
        raise ValueError(f"expected {BINS} bins")
    parts = []
    if prev_day is not None:
        parts.append(np.asarray(prev_day, dtype=float))
    offset = len(parts) * BINS
    parts.append(day)
    if next_day is not None:
        parts.append(np.asarray(next_day, dtype=float))
    smoothed = smooth_flat(np.concatenate(parts), window)
    return smoothed[offset:offset + BINS]


@dataclass(frozen=True)
class EdgeParams:
    """Knobs for threshold-crossing detection (times are minutes of local day)."""

    half_fraction: float = 0.5
    window: int = 12
    wake_search: tuple = (180, 720)    # [03:00, 12:00)
    bed_search: tuple = (1020, 1620)   # [17:00, 03:00 next day)
    noise_floor: float = 0.0

    def __post_init__(self):
        if not (0.0 < self.half_fraction < 1.0):
            raise ValueError("half_fraction must be in (0, 1)")
        if self.wake_search[1] > self.bed_search[0]:
            raise ValueError("wake and bed search windows must not overlap")

    def wake_bins(self) -> tuple[int, int]:
        return self.wake_search[0] // BIN_MINUTES, self.wake_search[1] // BIN_MINUTES

    def bed_bins(self) -> tuple[int, int]:
        return self.bed_search[0] // BIN_MINUTES, self.bed_search[1] // BIN_MINUTES


@dataclass
class DailyEdges:
    group_id: str
    day: int
    wake_min: float
    bed_min: float

    @property
    def day_length_min(self) -> float:
        return self.bed_min - self.wake_min


def edge_threshold(smoothed: Sequence[float], half_fraction: float = 0.5) -> float:
    """Half-range level between a day's smoothed minimum and maximum."""
    arr = np.asarray(smoothed, dtype=float)
    if len(arr) == 0:
        raise ValueError("empty series")
    a_min = float(arr.min())
    a_max = float(arr.max())
    return (a_max - a_min) * half_fraction + a_min


def _first_rising(values: np.ndarray, times: np.ndarray, m: float) -> Optional[float]:
    v0, v1 = values[:-1], values[1:]
    hits = np.nonzero((v0 < m) & (v1 >= m))[0]
    if len(hits) == 0:
        return None
    i = int(hits[0])
    frac = (m - values[i]) / (values[i + 1] - values[i])
    return float(times[i] + frac * (times[i + 1] - times[i]))


def _last_falling(values: np.ndarray, times: np.ndarray, m: float) -> Optional[float]:
    v0, v1 = values[:-1], values[1:]
    hits = np.nonzero((v0 >= m) & (v1 < m))[0]
    if len(hits) == 0:
        return None
    i = int(hits[-1])
    frac = (values[i] - m) / (values[i] - values[i + 1])
    return float(times[i] + frac * (times[i + 1] - times[i]))


def detect_daily_edges(
    smoothed_day: Sequence[float],
    params: EdgeParams = EdgeParams(),
    next_morning: Optional[Sequence[float]] = None,
    group_id: str = "",
    day: int = 0,
) -> Optional[DailyEdges]:
    """Wake and bed times for one smoothed day; None when either edge is missing.

    ``next_morning`` supplies the next day's smoothed early bins so the
    bed search can run past midnight; without it the search is clipped
    at 24:00.
    """
    sday = np.asarray(smoothed_day, dtype=float)
    if sday.shape != (BINS,):
        raise ValueError(f"expected {BINS} bins")

    wlo, whi = params.wake_bins()
    m_wake = edge_threshold(sday, params.half_fraction)
    if float(sday.max() - sday.min()) < params.noise_floor:
        return None
    times_day = np.arange(BINS) * BIN_MINUTES + BIN_MIDPOINT
    wake = _first_rising(sday[wlo:whi], times_day[wlo:whi], m_wake)
    if wake is None:
        return None

    blo, bhi = params.bed_bins()
    if next_morning is not None:
        ext = np.concatenate([sday, np.asarray(next_morning, dtype=float)])
    else:
        ext = sday
    bhi = min(bhi, len(ext))
    seg = ext[blo:bhi]
    if len(seg) < 2:
        return None
    times_ext = np.arange(len(ext)) * BIN_MINUTES + BIN_MIDPOINT
    if float(seg.max() - seg.min()) < params.noise_floor:
        return None
    m_bed = edge_threshold(seg, params.half_fraction)
    bed = _last_falling(seg, times_ext[blo:bhi], m_bed)
    if bed is None:
        return None
    return DailyEdges(group_id=group_id, day=day, wake_min=wake, bed_min=bed)


def detect_edges_cube(
    smoothed: np.ndarray,
    params: EdgeParams = EdgeParams(),
    noise_floor_per_group: Optional[np.ndarray] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Run edge detection over a (groups, days, 144) smoothed cube.

    Returns (wake, bed) float arrays of shape (groups, days) with NaN
    where no edge was found. The last day's bed search has no next
    morning and is clipped at midnight.
    """
    g, d, b = smoothed.shape
    wake = np.full((g, d), np.nan)
    bed = np.full((g, d), np.nan)
    for gi in range(g):
        p = params
        if noise_floor_per_group is not None:
            p = replace(params, noise_floor=float(noise_floor_per_group[gi]))
        for di in range(d):
            nxt = smoothed[gi, di + 1, : p.bed_bins()[1] - BINS] if di + 1 < d else None
            found = detect_daily_edges(smoothed[gi, di], p, next_morning=nxt)
            if found is not None:
                wake[gi, di] = found.wake_min
                bed[gi, di] = found.bed_min
    return wake, bed


def monthly_noise_floor(
    smoothed: np.ndarray,
    min_counts: float = 5.0,
    peak_fraction: float = 0.05,
) -> np.ndarray:
    """Per-group floor on a day's smoothed range: flat days yield no edges.

    floor = max(min_counts, peak_fraction * median over days of the
    daily smoothed peak).
    """
    daily_peak = smoothed.max(axis=2)
    return np.maximum(min_counts, peak_fraction * np.median(daily_peak, axis=1))


def bin_activity(
    table: ActivityTable,
    mode: str,
    calendar: Optional[Calendar] = None,
    locations: Optional[LocationTable] = None,
    cell_to_site: Optional[np.ndarray] = None,
    site_ids: Optional[np.ndarray] = None,
    level: str = "site",
    at_target_only: bool = False,
    threads: int = 1,
) -> BinnedActivity:
    """Count activity into (group, local day, 10-minute bin) cells.

    cell_based attributes each record to the area it occurred in;
    inhabitant_based attributes every record of a sim to the sim's home
    area; worker_based to the work area. ``at_target_only`` additionally
    keeps only records physically at the target area (used for on-site
    workplace series). Level "cell" groups by cell, "site" by merged
    site via ``cell_to_site``, "all" pools everything.

    Records with no attributable group are skipped and counted.
    """
    if mode not in MODES:
        raise ValueError(f"unknown grouping mode: {mode}")
    if level not in ("cell", "site", "all"):
        raise ValueError(f"unknown level: {level}")
    if level == "site" and (cell_to_site is None or site_ids is None):
        raise ValueError("site level requires cell_to_site and site_ids")
    if mode in (INHABITANT_BASED, WORKER_BASED) and locations is None:
        raise ValueError(f"{mode} requires a location table")

    days = table.local_days()
    if calendar is not None:
        day0, n_days = calendar.start_day, calendar.end_day - calendar.start_day + 1
    elif len(days):
        day0 = int(days.min())
        n_days = int(days.max()) - day0 + 1
    else:
        day0, n_days = 0, 1

    if level == "cell":
        area_of_cell = np.arange(table.n_cells, dtype=np.int64)
        group_ids = table.cell_ids
    elif level == "site":
        area_of_cell = np.asarray(cell_to_site, dtype=np.int64)
        group_ids = np.asarray(site_ids)
    else:
        area_of_cell = np.zeros(table.n_cells, dtype=np.int64)
        group_ids = np.asarray(["all"])
    n_groups = len(group_ids)

    if mode == CELL_BASED:
        group_of_record = area_of_cell[table.cell_codes]
    else:
        anchor = locations.home_code if mode == INHABITANT_BASED else locations.work_code
        anchor_area = np.where(anchor >= 0, area_of_cell[np.maximum(anchor, 0)], -1)
        group_of_record = anchor_area[table.sim_codes]

    if at_target_only:
        here = area_of_cell[table.cell_codes]
        group_of_record = np.where(here == group_of_record, group_of_record, -1)

    in_range = (days >= day0) & (days < day0 + n_days)
    valid = (group_of_record >= 0) & in_range
    skipped = int(len(valid) - valid.sum())

    bins = table.local_seconds() // timebase.BIN_SECONDS
    flat = (
        group_of_record * (n_days * BINS)
        + (days - day0) * BINS
        + bins
    )
    flat = flat[valid]
    size = n_groups * n_days * BINS

    if threads <= 1 or len(flat) < 1_000_000:
        counts = np.bincount(flat, minlength=size)
    else:
        from concurrent.futures import ThreadPoolExecutor

        chunks = np.array_split(flat, threads)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda c: np.bincount(c, minlength=size), chunks))
        counts = np.sum(parts, axis=0)

    return BinnedActivity(
        kind=mode,
        level=level,
        group_ids=group_ids,
        day0=day0,
        counts=counts.reshape(n_groups, n_days, BINS),
        tz_offset_minutes=table.tz_offset_minutes,
        skipped=skipped,
    )


def lower_median(values: Sequence[float]) -> float:
    """Median that returns the lower of the two middle values for even counts."""
    arr = np.sort(np.asarray(values, dtype=float))
    if len(arr) == 0:
        raise ValueError("empty input")
    return float(arr[(len(arr) - 1) // 2])


@dataclass
class EdgeSummary:
    group_id: str
    day_class: str
    n_days: int
    wake_min: float
    bed_min: float
    day_length_min: float


def median_edges(
    wake: np.ndarray,
    bed: np.ndarray,
    days: np.ndarray,
    calendar: Calendar,
    day_class: str = "all",
    group_id: str = "",
) -> Optional[EdgeSummary]:
    """Lower-median wake/bed/day-length over qualifying days with both edges.

    Day length is the median of the per-day differences, not the
    difference of the two medians.
    """
    ok = ~(np.isnan(wake) | np.isnan(bed))
    if day_class != "all":
        holi = calendar.holiday_mask(np.asarray(days, dtype=np.int64))
        ok &= holi if day_class == "holiday" else ~holi
    if not ok.any():
        return None
    w, b = wake[ok], bed[ok]
    return EdgeSummary(
        group_id=group_id,
        day_class=day_class,
        n_days=int(ok.sum()),
        wake_min=lower_median(w),
        bed_min=lower_median(b),
        day_length_min=lower_median(b - w),
    )


def dominant_period(series: Sequence[float], bin_minutes: int = BIN_MINUTES) -> float:
    """Period (hours) of the strongest non-constant Fourier component."""
    x = np.asarray(series, dtype=float)
    if len(x) < 3 * BINS:
        raise ValueError("need at least 3 days of bins")
    spectrum = np.abs(np.fft.rfft(x - x.mean()))
    k = int(np.argmax(spectrum[1:])) + 1
    total_hours = len(x) * bin_minutes / 60.0
    return total_hours / k


def periodogram(series: Sequence[float], bin_minutes: int = BIN_MINUTES) -> tuple[np.ndarray, np.ndarray]:
    """(period_hours, magnitude) for the non-DC half spectrum."""
    x = np.asarray(series, dtype=float)
    spectrum = np.abs(np.fft.rfft(x - x.mean()))
    total_hours = len(x) * bin_minutes / 60.0
    ks = np.arange(1, len(spectrum))
    return total_hours / ks, spectrum[1:]


def weekday_hour_heatmap(table: ActivityTable, record_mask: Optional[np.ndarray] = None) -> np.ndarray:
    """7x24 record counts by (weekday Monday=0, local hour)."""
    sub = table if record_mask is None else table.take(record_mask)
    wd = timebase.weekday_monday0(sub.local_days())
    hour = sub.local_seconds() // 3600
    flat = wd * 24 + hour
    return np.bincount(flat, minlength=7 * 24).reshape(7, 24)


WORK_START_SEARCH = (240, 840)   # [04:00, 14:00)
WORK_END_SEARCH = (840, 1440)    # [14:00, 24:00)


@dataclass
class SiteWorkingHours:
    """Medians are None when no workday produced a clean start/end pair."""

    site_id: str
    start_min: Optional[float]
    end_min: Optional[float]
    length_min: Optional[float]
    volume: int
    n_days: int
    low_confidence: bool


def working_hours(
    onsite_worker_activity: BinnedActivity,
    calendar: Calendar,
    params: EdgeParams = EdgeParams(),
    start_search: tuple = WORK_START_SEARCH,
    end_search: tuple = WORK_END_SEARCH,
    low_volume_factor: float = 0.1,
) -> list[SiteWorkingHours]:
    """Per-site median working-hour start/end/length over workdays.

    Expects the on-site worker series (records of each site's workers
    occurring at that site). Start is the first rising crossing of the
    day-level threshold inside ``start_search``; end is the last falling
    crossing of the threshold of the ``end_search`` window. Sites whose
    total workday volume is under ``low_volume_factor`` times the mean
    site volume are flagged low-confidence.
    """
    cube = onsite_worker_activity.smooth(params.window)
    g, d, _ = cube.shape
    days = onsite_worker_activity.day0 + np.arange(d)
    workday = ~calendar.holiday_mask(days)

    s_lo, s_hi = start_search[0] // BIN_MINUTES, start_search[1] // BIN_MINUTES
    e_lo, e_hi = end_search[0] // BIN_MINUTES, end_search[1] // BIN_MINUTES
    times = np.arange(BINS) * BIN_MINUTES + BIN_MIDPOINT

    floors = monthly_noise_floor(cube)
    volumes = onsite_worker_activity.counts[:, workday, :].sum(axis=(1, 2))
    mean_volume = volumes.mean() if g else 0.0

    out: list[SiteWorkingHours] = []
    for gi in range(g):
        starts, ends = [], []
        for di in np.nonzero(workday)[0]:
            day_s = cube[gi, di]
            if float(day_s.max() - day_s.min()) < floors[gi]:
                continue
            m_day = edge_threshold(day_s, params.half_fraction)
            start = _first_rising(day_s[s_lo:s_hi], times[s_lo:s_hi], m_day)
            seg = day_s[e_lo:e_hi]
            m_end = edge_threshold(seg, params.half_fraction)
            end = _last_falling(seg, times[e_lo:e_hi], m_end)
            if start is not None and end is not None and end > start:
                starts.append(start)
                ends.append(end)
        # a site with activity but no detectable edges still gets a row,
        # so thin plants stay visible downstream instead of vanishing
        if starts:
            starts_a, ends_a = np.asarray(starts), np.asarray(ends)
            med = (
                lower_median(starts_a),
                lower_median(ends_a),
                lower_median(ends_a - starts_a),
            )
        else:
            med = (None, None, None)
        out.append(
            SiteWorkingHours(
                site_id=str(onsite_worker_activity.group_ids[gi]),
                start_min=med[0],
                end_min=med[1],
                length_min=med[2],
                volume=int(volumes[gi]),
                n_days=len(starts),
                low_confidence=bool(
                    not starts or volumes[gi] < low_volume_factor * mean_volume
                ),
            )
        )
    return out


@dataclass
class StartEndPairing:
    top_starts: list    # (bin_start_minute, n_sites), most frequent first
    top_ends: list
    matrix: np.ndarray  # sites per (top start, top end) pair
    n_paired: int


def start_end_pairing(summaries: Sequence[SiteWorkingHours], k: int = 5) -> StartEndPairing:
    """Top-k half-hour start/end bins over site summaries, with pair counts."""
    summaries = [s for s in summaries if s.start_min is not None]
    if not summaries:
        raise ValueError("no site summaries with detected hours")
    starts = np.asarray([int(s.start_min // 30) * 30 for s in summaries])
    ends = np.asarray([int(s.end_min // 30) * 30 for s in summaries])

    def top(vals: np.ndarray) -> list:
        uniq, cnt = np.unique(vals, return_counts=True)
        order = np.lexsort((uniq, -cnt))[:k]
        return [(int(uniq[i]), int(cnt[i])) for i in order]

    tops, tope = top(starts), top(ends)
    s_index = {v: i for i, (v, _) in enumerate(tops)}
    e_index = {v: i for i, (v, _) in enumerate(tope)}
    matrix = np.zeros((len(tops), len(tope)), dtype=np.int64)
    paired = 0
    for s, e in zip(starts, ends):
        if int(s) in s_index and int(e) in e_index:
            matrix[s_index[int(s)], e_index[int(e)]] += 1
            paired += 1
    return StartEndPairing(top_starts=tops, top_ends=tope, matrix=matrix, n_paired=paired)


def write_edges_daily_csv(
    path: Union[str, Path],
    binned: BinnedActivity,
    wake: np.ndarray,
    bed: np.ndarray,
    calendar: Calendar,
    extra: Optional[tuple] = None,
) -> None:
    """Per-group, per-day edge rows; ``extra`` appends a second
    (binned, wake, bed) block, typically the pooled city series."""
    blocks = [(binned, wake, bed)]
    if extra is not None:
        blocks.append(extra)
    with open(path, "w") as fh:
        fh.write("group_kind,group_id,date,day_class,wake_min,bed_min,day_length_min,confidence\n")
        for blk, bwake, bbed in blocks:
            days = blk.day0 + np.arange(blk.n_days)
            holi = calendar.holiday_mask(days)
            for gi in range(blk.n_groups):
                for di in range(blk.n_days):
                    date = timebase.day_to_date(int(days[di]))
                    klass = "holiday" if holi[di] else "workday"
                    w, b = bwake[gi, di], bbed[gi, di]
                    if np.isnan(w) or np.isnan(b):
                        fh.write(f"{blk.kind},{blk.group_ids[gi]},{date},{klass},,,,no_edge\n")
                    else:
                        fh.write(
                            f"{blk.kind},{blk.group_ids[gi]},{date},{klass},"
                            f"{w:.3f},{b:.3f},{b - w:.3f},ok\n"
                        )
