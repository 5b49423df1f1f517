"""Per-sim daily mobility metrics: radius of gyration and location entropy.

Gyration is the visit-weighted RMS distance from the visit-weighted
center of mass, computed in a local planar projection and reported in
km. Entropy is -sum p ln p over visit shares, normalized by ln(N) where
N is the total visit count, so a day with one record (or one distinct
place) scores 0 and N singleton places score exactly 1.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np
import polars as pl

from . import timebase
from .geo import LocalProjection
from .tables import ActivityTable


@dataclass
class VisitSet:
    """Multiset of visited locations: (lat, lon, count) triples."""

    lats: np.ndarray
    lons: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        self.lats = np.asarray(self.lats, dtype=float)
        self.lons = np.asarray(self.lons, dtype=float)
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if len(self.counts) == 0 or self.counts.sum() < 1:
            raise ValueError("a VisitSet needs at least one visit")
        if (self.counts < 1).any():
            raise ValueError("visit counts must be positive")

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def radius_of_gyration(v: VisitSet, projection: Optional[LocalProjection] = None) -> float:
    """Visit-weighted RMS distance (km) from the center of mass."""
    proj = projection or LocalProjection(float(np.mean(v.lats)), float(np.mean(v.lons)))
    x, y = proj.to_xy(v.lats, v.lons)
    n = v.counts.astype(float)
    total = n.sum()
    cx = (n * x).sum() / total
    cy = (n * y).sum() / total
    sq = (x - cx) ** 2 + (y - cy) ** 2
    return float(np.sqrt((n * sq).sum() / total))


def location_entropy(v: VisitSet) -> float:
    """Normalized visit-share entropy; 0 for a single record or single place."""
    n = v.counts.astype(float)
    total = n.sum()
    if total <= 1 or len(n) <= 1:
        return 0.0
    p = n / total
    return float(-(p * np.log(p)).sum() / np.log(total))


def minmax_normalize(values: Sequence[float]) -> np.ndarray:
    """Scale to [0, 1]; a constant series maps to all zeros."""
    arr = np.asarray(values, dtype=float)
    if len(arr) == 0:
        raise ValueError("empty series")
    lo, hi = arr.min(), arr.max()
    if hi == lo:
        return np.zeros_like(arr)
    return (arr - lo) / (hi - lo)


def pearson_r(x: Sequence[float], y: Sequence[float]) -> float:
    """Sample Pearson correlation; errors on constant input."""
    xa = np.asarray(x, dtype=float)
    ya = np.asarray(y, dtype=float)
    if len(xa) != len(ya):
        raise ValueError("series lengths differ")
    if len(xa) < 2:
        raise ValueError("need at least 2 points")
    xc = xa - xa.mean()
    yc = ya - ya.mean()
    sx = np.sqrt((xc * xc).sum())
    sy = np.sqrt((yc * yc).sum())
    if sx == 0.0 or sy == 0.0:
        raise ValueError("correlation undefined for a constant series")
    return float((xc * yc).sum() / (sx * sy))


@dataclass
class MobilityDaily:
    """Columnar per-(sim, day) mobility metrics."""

    sim_codes: np.ndarray
    days: np.ndarray
    gyration_km: np.ndarray
    entropy: np.ndarray
    activity: np.ndarray
    sim_ids: np.ndarray  # pool shared with the source table

    def __len__(self) -> int:
        return len(self.days)

    def to_csv(self, path: Union[str, Path]) -> None:
        # date strings built per unique day; rows can run into the millions
        if len(self.days):
            d0 = int(self.days.min())
            lut = np.array(
                [str(timebase.day_to_date(d)) for d in range(d0, int(self.days.max()) + 1)]
            )
            dates = lut[self.days - d0]
        else:
            dates = np.empty(0, dtype=str)
        pl.DataFrame(
            {
                "sim_id": self.sim_ids[self.sim_codes],
                "date": dates,
                "gyration_km": self.gyration_km,
                "entropy": self.entropy,
                "activity": self.activity,
            }
        ).write_csv(path, float_precision=9)


def daily_mobility(
    table: ActivityTable,
    cell_lats: np.ndarray,
    cell_lons: np.ndarray,
    projection: Optional[LocalProjection] = None,
) -> tuple[MobilityDaily, int]:
    """Metrics per (sim, local day). Returns (results, n_skipped_unknown_cell).

    ``cell_lats``/``cell_lons`` are aligned to the table's cell pool;
    NaN marks a cell with no known coordinates, whose records are
    skipped and counted.
    """
    lats = np.asarray(cell_lats, dtype=float)
    lons = np.asarray(cell_lons, dtype=float)
    known = ~(np.isnan(lats[table.cell_codes]) | np.isnan(lons[table.cell_codes]))
    skipped = int(len(known) - known.sum())
    if skipped:
        table = table.take(known)
    if len(table) == 0:
        empty = np.empty(0)
        return (
            MobilityDaily(
                sim_codes=np.empty(0, np.int32),
                days=np.empty(0, np.int64),
                gyration_km=empty,
                entropy=empty.copy(),
                activity=np.empty(0, np.int64),
                sim_ids=table.sim_ids,
            ),
            skipped,
        )

    proj = projection or LocalProjection(float(np.nanmean(lats)), float(np.nanmean(lons)))
    x_all, y_all = proj.to_xy(lats, lons)

    days = table.local_days()
    day0 = int(days.min())
    span = int(days.max()) - day0 + 1
    n_cells = table.n_cells

    # one row per (sim, day, cell): visit counts
    key = (table.sim_codes.astype(np.int64) * span + (days - day0)) * n_cells + table.cell_codes
    uniq, counts = np.unique(key, return_counts=True)
    cell_u = (uniq % n_cells).astype(np.int64)
    simday_u = uniq // n_cells

    # collapse to one row per (sim, day)
    group_start = np.empty(len(uniq), dtype=bool)
    group_start[0] = True
    group_start[1:] = simday_u[1:] != simday_u[:-1]
    starts = np.nonzero(group_start)[0]
    simday = simday_u[starts]

    n = counts.astype(float)
    xs = x_all[cell_u]
    ys = y_all[cell_u]
    tot = np.add.reduceat(n, starts)
    cx = np.add.reduceat(n * xs, starts) / tot
    cy = np.add.reduceat(n * ys, starts) / tot
    cx_rows = np.repeat(cx, np.diff(np.append(starts, len(uniq))))
    cy_rows = np.repeat(cy, np.diff(np.append(starts, len(uniq))))
    sq = (xs - cx_rows) ** 2 + (ys - cy_rows) ** 2
    gyr = np.sqrt(np.add.reduceat(n * sq, starts) / tot)

    p = n / np.repeat(tot, np.diff(np.append(starts, len(uniq))))
    plogp = np.where(p > 0, p * np.log(p), 0.0)
    h = -np.add.reduceat(plogp, starts)
    with np.errstate(divide="ignore", invalid="ignore"):
        ent = np.where(tot > 1, h / np.log(tot), 0.0)
    # single distinct location gives h == 0 regardless of tot
    n_distinct = np.diff(np.append(starts, len(uniq)))
    ent[n_distinct <= 1] = 0.0

    return (
        MobilityDaily(
            sim_codes=(simday // span).astype(np.int32),
            days=(simday % span + day0).astype(np.int64),
            gyration_km=gyr,
            entropy=ent,
            activity=tot.astype(np.int64),
            sim_ids=table.sim_ids,
        ),
        skipped,
    )


def city_daily_mean(daily: MobilityDaily) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Mean gyration and entropy over sims, per day: (days, mean_gyr, mean_ent)."""
    if len(daily) == 0:
        return np.empty(0, np.int64), np.empty(0), np.empty(0)
    order = np.argsort(daily.days, kind="stable")
    d = daily.days[order]
    first = np.empty(len(d), dtype=bool)
    first[0] = True
    first[1:] = d[1:] != d[:-1]
    starts = np.nonzero(first)[0]
    sizes = np.diff(np.append(starts, len(d)))
    g = np.add.reduceat(daily.gyration_km[order], starts) / sizes
    e = np.add.reduceat(daily.entropy[order], starts) / sizes
    return d[starts], g, e
