"""Socioeconomic indicators joined to subscribers.

Three proxies: property price per square meter at the home site (median
over classified-ad listings located in the site's polygon), the price of
the dominant handset, and the handset's relative age. Each proxy is
binned into fixed categories and crossed with the wake-up time of the
sim's home group.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .geo import Tessellation
from .locations import LocationTable
from .tables import DeviceTable

# category edges, half-open [lo, hi)
PROPERTY_BINS_HUF = ((300_000, 500_000), (500_000, 700_000), (700_000, 900_000), (900_000, 1_300_000))
PHONE_PRICE_BINS_EUR = ((0, 150), (150, 300), (300, 450), (450, 600), (600, 750))
PHONE_AGE_BINS_YEARS = ((0, 1), (1, 2), (2, 3), (3, 4), (4, 5))
MAX_PHONE_AGE_YEARS = 5.0


@dataclass(frozen=True)
class EstateAd:
    lat: float
    lon: float
    floor_sqm: float
    price_huf: float

    def __post_init__(self):
        if self.floor_sqm <= 0:
            raise ValueError("floor_sqm must be positive")
        if self.price_huf <= 0:
            raise ValueError("price must be positive")

    @property
    def price_per_sqm(self) -> float:
        return self.price_huf / self.floor_sqm


@dataclass(frozen=True)
class DeviceCatalogEntry:
    tac: str
    vendor: str
    model: str
    release_date: str  # YYYY-MM
    price_eur: Optional[float]
    is_phone: bool

    def __post_init__(self):
        if not (len(self.tac) == 8 and self.tac.isdigit()):
            raise ValueError("tac must be 8 digits")


@dataclass
class SesProfile:
    sim_id: str
    home_price_per_sqm: Optional[float] = None
    phone_price_eur: Optional[float] = None
    phone_age_years: Optional[float] = None


def read_estate_ads(path: Union[str, Path]) -> list[EstateAd]:
    out = []
    with open(path) as fh:
        for row in csv.DictReader(fh):
            out.append(
                EstateAd(
                    lat=float(row["lat"]),
                    lon=float(row["lon"]),
                    floor_sqm=float(row["floor_sqm"]),
                    price_huf=float(row["price_huf"]),
                )
            )
    return out


def read_device_catalog(path: Union[str, Path]) -> dict[str, DeviceCatalogEntry]:
    out: dict[str, DeviceCatalogEntry] = {}
    with open(path) as fh:
        for row in csv.DictReader(fh):
            entry = DeviceCatalogEntry(
                tac=row["tac"],
                vendor=row["vendor"],
                model=row["model"],
                release_date=row["release_date"],
                price_eur=float(row["price_eur"]) if row["price_eur"] else None,
                is_phone=row["is_phone"].strip().lower() in ("1", "true", "yes"),
            )
            out[entry.tac] = entry
    return out


def site_price(ads: Sequence[EstateAd], tess: Tessellation) -> tuple[dict[str, float], int]:
    """Median price per m² per site; ads outside the box are dropped and counted."""
    if not ads:
        return {}, 0
    lats = np.array([a.lat for a in ads])
    lons = np.array([a.lon for a in ads])
    pps = np.array([a.price_per_sqm for a in ads])
    idx = tess.locate_many(lats, lons)
    dropped = int((idx < 0).sum())
    keep = idx >= 0
    idx, pps = idx[keep], pps[keep]
    order = np.argsort(idx, kind="stable")
    idx, pps = idx[order], pps[order]
    prices: dict[str, float] = {}
    if len(idx):
        first = np.empty(len(idx), dtype=bool)
        first[0] = True
        first[1:] = idx[1:] != idx[:-1]
        starts = np.nonzero(first)[0]
        ends = np.append(starts[1:], len(idx))
        for s, e in zip(starts, ends):
            prices[str(tess.site_ids[idx[s]])] = float(np.median(pps[s:e]))
    return prices, dropped


def dominant_device(
    intervals: Sequence[tuple[str, int, int]],
    catalog: dict[str, DeviceCatalogEntry],
) -> tuple[Optional[DeviceCatalogEntry], Optional[str]]:
    """Pick the TAC with the longest total usage for one sim.

    ``intervals`` holds (tac, first_seen, last_seen) epoch-second rows.
    Duration of an interval is last - first + one 10 s tick, so a single
    record still counts. Returns (entry, dominant_tac); entry is None
    when the winner is not in the catalog.
    """
    if not intervals:
        return None, None
    totals: dict[str, int] = {}
    for tac, first, last in intervals:
        totals[tac] = totals.get(tac, 0) + (int(last) - int(first) + 10)
    winner = min(totals, key=lambda t: (-totals[t], t))
    return catalog.get(winner), winner


@dataclass
class SesTable:
    """Per-sim SES fields aligned to a sim pool; NaN marks absent values."""

    sim_ids: np.ndarray
    home_price: np.ndarray
    phone_price: np.ndarray
    phone_age: np.ndarray
    counters: dict

    def profile(self, i: int) -> SesProfile:
        def opt(v: float) -> Optional[float]:
            return None if np.isnan(v) else float(v)

        return SesProfile(
            sim_id=str(self.sim_ids[i]),
            home_price_per_sqm=opt(self.home_price[i]),
            phone_price_eur=opt(self.phone_price[i]),
            phone_age_years=opt(self.phone_age[i]),
        )

    def to_csv(self, path: Union[str, Path]) -> None:
        def fmt(v: float) -> str:
            return "" if np.isnan(v) else f"{v:.6f}"

        with open(path, "w") as fh:
            fh.write("sim_id,home_price_per_sqm,phone_price_eur,phone_age_years\n")
            for i in range(len(self.sim_ids)):
                fh.write(
                    f"{self.sim_ids[i]},{fmt(self.home_price[i])},"
                    f"{fmt(self.phone_price[i])},{fmt(self.phone_age[i])}\n"
                )


def _months_between(earlier: str, later: str) -> int:
    y0, m0 = int(earlier[:4]), int(earlier[5:7])
    y1, m1 = int(later[:4]), int(later[5:7])
    return (y1 - y0) * 12 + (m1 - m0)


def build_profiles(
    locations: LocationTable,
    prices: dict[str, float],
    cell_to_site: np.ndarray,
    site_ids: np.ndarray,
    devices: DeviceTable,
    catalog: dict[str, DeviceCatalogEntry],
    dataset_month: str,
) -> SesTable:
    """Join home-site price and dominant-device price/age per sim.

    Sims whose dominant TAC is missing from the catalog, or whose device
    is not a phone, get no phone fields; both cases are counted.
    """
    n = len(locations.sim_ids)
    home_price = np.full(n, np.nan)
    phone_price = np.full(n, np.nan)
    phone_age = np.full(n, np.nan)
    counters = {
        "no_home": 0,
        "unpriced_site": 0,
        "no_device": 0,
        "uncataloged_tac": 0,
        "non_phone": 0,
        "negative_age": 0,
    }

    price_of_site = np.full(len(site_ids), np.nan)
    for i, sid in enumerate(site_ids):
        if str(sid) in prices:
            price_of_site[i] = prices[str(sid)]

    has_home = locations.home_code >= 0
    counters["no_home"] = int((~has_home).sum())
    home_site = np.where(has_home, cell_to_site[np.maximum(locations.home_code, 0)], -1)
    priced = has_home & (home_site >= 0)
    home_price[priced] = price_of_site[home_site[priced]]
    counters["unpriced_site"] = int(np.isnan(home_price[priced]).sum() + (has_home & (home_site < 0)).sum())

    # group device intervals per sim
    order = np.argsort(devices.sim_codes, kind="stable")
    sims_d = devices.sim_codes[order]
    seen = np.zeros(n, dtype=bool)
    if len(sims_d):
        seen[np.unique(sims_d)] = True
    counters["no_device"] = int((~seen).sum())

    i = 0
    m = len(sims_d)
    while i < m:
        j = i
        sim = sims_d[i]
        totals: dict[str, int] = {}
        while j < m and sims_d[j] == sim:
            k = order[j]
            tac = str(devices.tacs[k])
            totals[tac] = totals.get(tac, 0) + int(devices.last_seen[k] - devices.first_seen[k]) + 10
            j += 1
        winner = min(totals, key=lambda t: (-totals[t], t))
        entry = catalog.get(winner)
        if entry is None:
            counters["uncataloged_tac"] += 1
        elif not entry.is_phone:
            counters["non_phone"] += 1
        else:
            if entry.price_eur is not None:
                phone_price[sim] = entry.price_eur
            age_m = _months_between(entry.release_date, dataset_month)
            if age_m < 0:
                counters["negative_age"] += 1
            else:
                phone_age[sim] = age_m / 12.0
        i = j

    return SesTable(
        sim_ids=locations.sim_ids,
        home_price=home_price,
        phone_price=phone_price,
        phone_age=phone_age,
        counters=counters,
    )


def assign_bins(values: np.ndarray, bins: Sequence[tuple]) -> np.ndarray:
    """Index of the half-open [lo, hi) bin per value; -1 when in none."""
    out = np.full(len(values), -1, dtype=np.int32)
    for i, (lo, hi) in enumerate(bins):
        out[(values >= lo) & (values < hi)] = i
    out[np.isnan(values)] = -1
    return out


def categorize(ses: SesTable) -> dict[str, np.ndarray]:
    """Per-sim bin indices for all three proxies (-1 = uncategorized).

    Phones at or past the age cap stay uncategorized for the age proxy.
    """
    age = ses.phone_age.copy()
    age[age >= MAX_PHONE_AGE_YEARS] = np.nan
    return {
        "property": assign_bins(ses.home_price, PROPERTY_BINS_HUF),
        "phone_price": assign_bins(ses.phone_price, PHONE_PRICE_BINS_EUR),
        "phone_age": assign_bins(age, PHONE_AGE_BINS_YEARS),
    }


@dataclass
class CategoryMatrix:
    row_bins: Sequence[tuple]
    col_bins: Sequence[tuple]
    median_wake: np.ndarray  # (rows, cols), NaN when empty
    counts: np.ndarray       # (rows, cols) int

    def to_csv(self, path: Union[str, Path]) -> None:
        with open(path, "w") as fh:
            fh.write("row_bin,col_bin,median_wake_min,count\n")
            for r in range(self.median_wake.shape[0]):
                for c in range(self.median_wake.shape[1]):
                    wake = "" if np.isnan(self.median_wake[r, c]) else f"{self.median_wake[r, c]:.3f}"
                    fh.write(f"{r},{c},{wake},{self.counts[r, c]}\n")


def wakeup_by_category(
    row_assign: np.ndarray,
    col_assign: np.ndarray,
    wake_min: np.ndarray,
    row_bins: Sequence[tuple],
    col_bins: Sequence[tuple],
) -> CategoryMatrix:
    """Median wake and sim count per (row bin, col bin).

    ``wake_min`` is each sim's home-group wake value; sims lacking any
    of the three inputs are left out.
    """
    rows, cols = len(row_bins), len(col_bins)
    wake = np.full((rows, cols), np.nan)
    counts = np.zeros((rows, cols), dtype=np.int64)
    ok = (row_assign >= 0) & (col_assign >= 0) & ~np.isnan(wake_min)
    for r in range(rows):
        for c in range(cols):
            sel = ok & (row_assign == r) & (col_assign == c)
            n = int(sel.sum())
            counts[r, c] = n
            if n:
                wake[r, c] = float(np.median(wake_min[sel]))
    return CategoryMatrix(row_bins=row_bins, col_bins=col_bins, median_wake=wake, counts=counts)


def marginal_medians(assign: np.ndarray, wake_min: np.ndarray, n_bins: int) -> list[Optional[float]]:
    """Median wake per bin over all sims assigned to it (None when empty)."""
    out: list[Optional[float]] = []
    ok = (assign >= 0) & ~np.isnan(wake_min)
    for b in range(n_bins):
        sel = ok & (assign == b)
        out.append(float(np.median(wake_min[sel])) if sel.any() else None)
    return out
