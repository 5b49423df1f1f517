"""Synthetic CDR scenario generator with planted ground truth.

Emits the exact input files the pipeline consumes (wide activity CSV,
cell list, calendar, estate ads, device catalog) plus a ground-truth
JSON that records what was planted, so every downstream stage has an
oracle to be checked against.

Each sim's daily activity is an inhomogeneous Poisson process over the
144 ten-minute bins: near-zero intensity at night, a logistic rise
centered on the sim's wake time, a plateau, and a logistic fall at
bedtime. Holidays shift the profile by the configured amounts. Workers'
records during their shift occur at the work site's cell; everything
else lands at the home cell, so home/work inference and on-site
working-hours detection have exact targets.

Sites are laid out on a jittered grid and carry a price rank driving a
wake-time gradient (higher-priced sites wake later) plus ad prices,
handset prices, and handset ages, giving the SES stage a planted
monotone pattern.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Optional, Union

import numpy as np
import polars as pl
from scipy.special import expit

from . import timebase

BINS = timebase.BINS_PER_DAY
KM_PER_DEG_LAT = 111.19492664455873  # 6371.0088 km * pi / 180
# non-worker errand window, matches the workplace inference window so their
# daytime records never concentrate at the home cell
ERRAND_START_S = 9 * 3600
ERRAND_END_S = 16 * 3600


@dataclass
class ChronotypeGroup:
    share: float
    wake_mu_min: float
    wake_sigma_min: float
    bed_mu_min: float
    bed_sigma_min: float
    holiday_wake_shift_min: float
    holiday_bed_shift_min: float
    records_per_sim_day: float


@dataclass
class ScenarioConfig:
    """Everything the generator needs; defaults give the standard scenario."""

    seed: int = 20170401
    n_sims: int = 100_000
    n_sites: int = 50
    n_low_volume_sites: int = 2
    low_volume_population: int = 20
    low_volume_workers: int = 15
    start_date: str = "2017-04-01"
    days: int = 30
    tz_offset_minutes: int = 120
    center_lat: float = 47.4979
    center_lon: float = 19.0402
    box_km: float = 30.0
    records_per_sim_day: float = 1.667
    worker_share: float = 0.6
    wake_mu_min: float = 430.0        # 07:10
    bed_mu_min: float = 1190.0        # 19:50
    personal_sigma_min: float = 10.0
    holiday_wake_shift_min: float = 60.0
    holiday_bed_shift_min: float = 40.0
    ses_wake_spread_min: float = 60.0
    work_start_min: float = 540.0     # 09:00
    work_end_min: float = 1020.0      # 17:00
    arrival_jitter_min: float = 10.0
    ramp_width_min: float = 30.0      # 10-90% rise width
    night_floor: float = 0.02
    price_base_huf: float = 310_000.0
    price_span_huf: float = 980_000.0
    ads_per_site: int = 40
    phone_price_max_eur: float = 750.0
    phone_price_sigma_eur: float = 60.0
    nonphone_share: float = 0.02
    multidevice_share: float = 0.04
    uncataloged_share: float = 0.01
    missing_tac_share: float = 0.01
    n_malformed: int = 100
    timestamp_format: str = "iso"     # "iso" | "epoch"
    holidays: tuple = ("2017-04-14", "2017-04-17")
    site_work_start_overrides: dict = field(default_factory=dict)
    chronotype_groups: Optional[list] = None

    def validate(self) -> None:
        if self.bed_mu_min <= self.wake_mu_min:
            raise ValueError("bed must come after wake")
        if self.work_end_min <= self.work_start_min:
            raise ValueError("work end must come after work start")
        if self.records_per_sim_day <= 0:
            raise ValueError("activity rate must be positive")
        if self.personal_sigma_min < 0:
            raise ValueError("sigma must be non-negative")
        if not 0 <= self.worker_share <= 1:
            raise ValueError("worker_share must be in [0, 1]")
        if self.timestamp_format not in ("iso", "epoch"):
            raise ValueError("timestamp_format must be iso or epoch")
        if self.n_sites < 2:
            raise ValueError("need at least 2 sites")
        if self.chronotype_groups is not None:
            groups = [ChronotypeGroup(**g) if isinstance(g, dict) else g for g in self.chronotype_groups]
            total = sum(g.share for g in groups)
            if abs(total - 1.0) > 1e-9:
                raise ValueError("group shares must sum to 1")
            for g in groups:
                if g.bed_mu_min <= g.wake_mu_min:
                    raise ValueError("group bed must come after wake")
                if g.records_per_sim_day <= 0:
                    raise ValueError("group rate must be positive")
                if g.wake_sigma_min < 0 or g.bed_sigma_min < 0:
                    raise ValueError("group sigma must be non-negative")

    def groups(self) -> Optional[list]:
        if self.chronotype_groups is None:
            return None
        return [ChronotypeGroup(**g) if isinstance(g, dict) else g for g in self.chronotype_groups]


@dataclass
class GroundTruth:
    """What was planted, keyed the same way pipeline outputs are."""

    config: dict
    sites: list          # per-site dicts
    sim_ids: list
    home_site: list
    work_site: list      # planted workplace site id, "" for non-workers
    is_worker: list
    group_index: list
    wake_min: list       # per-sim workday wake (with personal noise)
    bed_min: list
    dominant_tac: list
    phone_price_eur: list   # None when not a cataloged phone
    phone_age_years: list

    def to_json(self, path: Union[str, Path]) -> None:
        with open(path, "w") as fh:
            json.dump(asdict(self), fh)

    @classmethod
    def from_json(cls, path: Union[str, Path]) -> "GroundTruth":
        with open(path) as fh:
            return cls(**json.load(fh))


def _plateau_intensity(wake_min: np.ndarray, bed_min: np.ndarray, ramp_width: float, floor: float) -> np.ndarray:
    """Relative intensity per 10-minute bin for each (wake, bed) row."""
    mids = np.arange(BINS) * 10.0 + 5.0
    scale = ramp_width / (2.0 * math.log(9.0))  # 10-90% width -> logistic scale
    rise = expit((mids[None, :] - wake_min[:, None]) / scale)
    fall = expit((bed_min[:, None] - mids[None, :]) / scale)
    shape = rise * fall
    return floor + (1.0 - floor) * shape


def _site_layout(cfg: ScenarioConfig, rng: np.random.Generator):
    n = cfg.n_sites
    per_row = int(math.ceil(math.sqrt(n)))
    spacing = cfg.box_km / per_row
    idx = np.arange(n)
    gx = (idx % per_row + 0.5) * spacing - cfg.box_km / 2
    gy = (idx // per_row + 0.5) * spacing - cfg.box_km / 2
    gx = gx + rng.uniform(-0.2, 0.2, n) * spacing
    gy = gy + rng.uniform(-0.2, 0.2, n) * spacing
    km_per_deg_lon = KM_PER_DEG_LAT * math.cos(math.radians(cfg.center_lat))
    lat = cfg.center_lat + gy / KM_PER_DEG_LAT
    lon = cfg.center_lon + gx / km_per_deg_lon
    return lat, lon, km_per_deg_lon


def generate(cfg: ScenarioConfig, out_dir: Union[str, Path]) -> dict:
    """Write all scenario files into ``out_dir``; returns their paths.

    Deterministic for a fixed config: every random draw comes from
    substreams keyed by (seed, purpose tag, day), so per-day record
    generation could run in parallel without changing a single byte.
    """
    cfg.validate()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    pop_rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, 1)))

    # --- sites and cells ---------------------------------------------------
    site_lat, site_lon, km_per_deg_lon = _site_layout(cfg, pop_rng)
    n_sites = cfg.n_sites
    price_rank = pop_rng.permutation(n_sites) / max(n_sites - 1, 1)
    low_volume = np.zeros(n_sites, dtype=bool)
    if cfg.n_low_volume_sites:
        low_volume[pop_rng.choice(n_sites, cfg.n_low_volume_sites, replace=False)] = True

    cells_per_site = pop_rng.integers(1, 4, n_sites)
    cell_rows = []
    site_id_of = []
    first_cell_code_of_site = np.zeros(n_sites, dtype=np.int64)
    cell_site = []  # site index per cell
    for s in range(n_sites):
        site_id_of.append(f"c{s:03d}a")
        first_cell_code_of_site[s] = len(cell_rows)
        for j in range(int(cells_per_site[s])):
            dx = pop_rng.uniform(-0.3, 0.3)
            dy = pop_rng.uniform(-0.3, 0.3)
            cell_rows.append(
                (
                    f"c{s:03d}{chr(97 + j)}",
                    site_lat[s] + dy / KM_PER_DEG_LAT,
                    site_lon[s] + dx / km_per_deg_lon,
                    site_lat[s],
                    site_lon[s],
                )
            )
            cell_site.append(s)
    cell_ids = np.array([r[0] for r in cell_rows])
    cell_site = np.asarray(cell_site, dtype=np.int64)

    cells_path = out / "cells.csv"
    with open(cells_path, "w") as fh:
        fh.write("cell_id,centroid_lat,centroid_lon,station_lat,station_lon\n")
        for cid, clat, clon, slat, slon in cell_rows:
            fh.write(f"{cid},{clat:.7f},{clon:.7f},{slat:.7f},{slon:.7f}\n")

    # --- calendar ----------------------------------------------------------
    day0 = timebase.parse_date(cfg.start_date)
    days = np.arange(day0, day0 + cfg.days)
    public_holidays = {timebase.parse_date(d) for d in cfg.holidays}
    is_holiday = np.array(
        [(int(d) in public_holidays) or timebase.weekday_monday0(int(d)) >= 5 for d in days]
    )
    calendar_path = out / "calendar.json"
    with open(calendar_path, "w") as fh:
        json.dump(
            {
                "tz_offset_minutes": cfg.tz_offset_minutes,
                "start_date": cfg.start_date,
                "end_date": str(timebase.day_to_date(int(days[-1]))),
                "holidays": sorted(cfg.holidays),
                "workday_overrides": [],
            },
            fh,
            indent=2,
        )
        fh.write("\n")

    # --- population --------------------------------------------------------
    n = cfg.n_sims
    sim_ids = np.array([f"s{i:07d}" for i in range(n)])

    normal_sites = np.nonzero(~low_volume)[0]
    low_sites = np.nonzero(low_volume)[0]
    home_site = np.empty(n, dtype=np.int64)
    n_low_pop = cfg.low_volume_population * len(low_sites)
    if n_low_pop >= n:
        raise ValueError("low-volume population exceeds total sims")
    home_site[:n_low_pop] = np.repeat(low_sites, cfg.low_volume_population)
    home_site[n_low_pop:] = normal_sites[
        pop_rng.integers(0, len(normal_sites), n - n_low_pop)
    ]
    home_site = home_site[pop_rng.permutation(n)]

    # pick the concrete cell within the home site
    cell_offset = pop_rng.integers(0, 1 << 30, n) % cells_per_site[home_site]
    home_cell = first_cell_code_of_site[home_site] + cell_offset

    is_worker = pop_rng.random(n) < cfg.worker_share
    work_site = home_site.copy()
    workers = np.nonzero(is_worker)[0]
    # commuters: work at a normal site other than home
    draw = normal_sites[pop_rng.integers(0, len(normal_sites), len(workers))]
    for _ in range(8):
        clash = draw == home_site[workers]
        if not clash.any():
            break
        draw[clash] = normal_sites[pop_rng.integers(0, len(normal_sites), int(clash.sum()))]
    still = draw == home_site[workers]
    draw[still] = normal_sites[(np.searchsorted(normal_sites, draw[still]) + 1) % len(normal_sites)]
    work_site[workers] = draw
    # force a small planted crew at each low-volume site
    cursor = 0
    for ls in low_sites:
        crew = workers[cursor:cursor + cfg.low_volume_workers]
        work_site[crew] = ls
        cursor += cfg.low_volume_workers
    work_cell_offset = pop_rng.integers(0, 1 << 30, n) % cells_per_site[work_site]
    work_cell = first_cell_code_of_site[work_site] + work_cell_offset
    work_cell[~is_worker] = home_cell[~is_worker]

    # --- chronotypes ---------------------------------------------------------
    groups = cfg.groups()
    site_work_start = np.full(n_sites, cfg.work_start_min)
    for k, v in cfg.site_work_start_overrides.items():
        site_work_start[int(k)] = float(v)
    site_work_end = site_work_start + (cfg.work_end_min - cfg.work_start_min)

    if groups is None:
        group_index = np.zeros(n, dtype=np.int64)
        site_wake = cfg.wake_mu_min + (price_rank - 0.5) * cfg.ses_wake_spread_min
        site_bed = np.full(n_sites, cfg.bed_mu_min)
        wake = site_wake[home_site] + pop_rng.normal(0.0, cfg.personal_sigma_min, n)
        bed = site_bed[home_site] + pop_rng.normal(0.0, cfg.personal_sigma_min, n)
        hshift_w = np.full(n, cfg.holiday_wake_shift_min)
        hshift_b = np.full(n, cfg.holiday_bed_shift_min)
        rate = np.full(n, cfg.records_per_sim_day)
    else:
        shares = np.array([g.share for g in groups])
        group_index = pop_rng.choice(len(groups), size=n, p=shares)
        wake = np.empty(n)
        bed = np.empty(n)
        hshift_w = np.empty(n)
        hshift_b = np.empty(n)
        rate = np.empty(n)
        for gi, g in enumerate(groups):
            sel = group_index == gi
            m = int(sel.sum())
            wake[sel] = g.wake_mu_min + pop_rng.normal(0.0, g.wake_sigma_min, m)
            bed[sel] = g.bed_mu_min + pop_rng.normal(0.0, g.bed_sigma_min, m)
            hshift_w[sel] = g.holiday_wake_shift_min
            hshift_b[sel] = g.holiday_bed_shift_min
            rate[sel] = g.records_per_sim_day
        site_wake = np.full(n_sites, np.nan)
        site_bed = np.full(n_sites, np.nan)
    bed = np.maximum(bed, wake + 60.0)  # keep profiles well-formed under noise

    arrive = site_work_start[work_site] + pop_rng.uniform(
        -cfg.arrival_jitter_min, cfg.arrival_jitter_min, n
    )
    depart = site_work_end[work_site] + pop_rng.uniform(
        -cfg.arrival_jitter_min, cfg.arrival_jitter_min, n
    )
    arrive_s = (arrive * 60).astype(np.int64)
    depart_s = (depart * 60).astype(np.int64)

    # --- subscriber attributes ----------------------------------------------
    customer = np.where(pop_rng.random(n) < 0.95, "consumer", "business")
    subscription = np.where(pop_rng.random(n) < 0.6, "prepaid", "postpaid")
    age = np.clip(pop_rng.normal(40, 15, n).round().astype(np.int64), 16, 90)
    age_missing = pop_rng.random(n) < 0.1
    gender = np.where(pop_rng.random(n) < 0.5, "F", "M")
    gender[pop_rng.random(n) < 0.05] = ""

    # --- device catalog and per-sim handsets ---------------------------------
    n_phone_tacs = 50
    phone_tacs = np.array([f"44{i:06d}" for i in range(n_phone_tacs)])
    phone_prices = np.linspace(20, cfg.phone_price_max_eur - 10, n_phone_tacs)
    phone_prices = phone_prices + pop_rng.uniform(-5, 5, n_phone_tacs)
    phone_ages = np.clip(
        5.0 * (1.0 - phone_prices / cfg.phone_price_max_eur) * pop_rng.uniform(0.85, 1.15, n_phone_tacs),
        0.1,
        4.9,
    )
    nonphone_tacs = np.array([f"55{i:06d}" for i in range(5)])
    uncataloged_tacs = np.array([f"66{i:06d}" for i in range(3)])

    month0 = cfg.start_date[:7]
    y0, m0 = int(month0[:4]), int(month0[5:7])

    def month_minus(months: int) -> str:
        total = y0 * 12 + (m0 - 1) - months
        return f"{total // 12:04d}-{total % 12 + 1:02d}"

    catalog_path = out / "device_catalog.csv"
    with open(catalog_path, "w") as fh:
        fh.write("tac,vendor,model,release_date,price_eur,is_phone\n")
        for i, tac in enumerate(phone_tacs):
            rel = month_minus(int(round(phone_ages[i] * 12)))
            fh.write(f"{tac},vendor{i % 7},model{i},{rel},{phone_prices[i]:.2f},true\n")
        for i, tac in enumerate(nonphone_tacs):
            rel = month_minus(12 + 3 * i)
            fh.write(f"{tac},vendor9,modem{i},{rel},,false\n")

    target_price = np.clip(
        price_rank[home_site] * cfg.phone_price_max_eur
        + pop_rng.normal(0, cfg.phone_price_sigma_eur, n),
        1.0,
        cfg.phone_price_max_eur - 1.0,
    )
    tac_idx = np.argmin(np.abs(target_price[:, None] - phone_prices[None, :]), axis=1)
    sim_tac = phone_tacs[tac_idx].copy()
    sim_price: np.ndarray = phone_prices[tac_idx].copy()
    sim_age: np.ndarray = phone_ages[tac_idx].copy()
    # re-derive age from the written (month-rounded) release date so the
    # ground truth matches what a catalog consumer can compute
    sim_age = np.round(sim_age * 12) / 12.0

    roll = pop_rng.random(n)
    non_phone = roll < cfg.nonphone_share
    uncat = (roll >= cfg.nonphone_share) & (roll < cfg.nonphone_share + cfg.uncataloged_share)
    sim_tac[non_phone] = nonphone_tacs[pop_rng.integers(0, len(nonphone_tacs), int(non_phone.sum()))]
    sim_tac[uncat] = uncataloged_tacs[pop_rng.integers(0, len(uncataloged_tacs), int(uncat.sum()))]
    sim_price[non_phone | uncat] = np.nan
    sim_age[non_phone | uncat] = np.nan

    multi = pop_rng.random(n) < cfg.multidevice_share
    second_idx = pop_rng.integers(0, n_phone_tacs, n)
    second_tac = phone_tacs[second_idx]
    switch_day = pop_rng.integers(max(1, cfg.days * 2 // 3), cfg.days, n)

    # --- intensity profiles ---------------------------------------------------
    shape_work = _plateau_intensity(wake, bed, cfg.ramp_width_min, cfg.night_floor)
    lam_work = shape_work * (rate / shape_work.sum(axis=1))[:, None]
    del shape_work
    shape_holi = _plateau_intensity(wake + hshift_w, bed + hshift_b, cfg.ramp_width_min, cfg.night_floor)
    lam_holi = shape_holi * (rate / shape_holi.sum(axis=1))[:, None]
    del shape_holi

    # --- records, day by day ---------------------------------------------------
    rec_sim_parts, rec_ts_parts, rec_cell_parts, rec_tac_parts = [], [], [], []
    off_s = cfg.tz_offset_minutes * 60
    for di in range(cfg.days):
        day_rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, 2, di)))
        lam = lam_holi if is_holiday[di] else lam_work
        counts = day_rng.poisson(lam)
        flat = counts.ravel()
        nz = np.nonzero(flat)[0]
        reps = flat[nz]
        r_sim = np.repeat((nz // BINS).astype(np.int64), reps)
        r_bin = np.repeat((nz % BINS).astype(np.int64), reps)
        ticks = day_rng.integers(0, 60, len(r_sim))
        sec_local = r_bin * 600 + ticks * 10
        at_work = (
            (~is_holiday[di])
            & is_worker[r_sim]
            & (sec_local >= arrive_s[r_sim])
            & (sec_local < depart_s[r_sim])
        )
        r_cell = np.where(at_work, work_cell[r_sim], home_cell[r_sim])
        # non-workers run daytime errands across town on workdays, so no
        # single cell accumulates enough presence to look like a workplace
        errand = (
            (~is_holiday[di])
            & ~is_worker[r_sim]
            & (sec_local >= ERRAND_START_S)
            & (sec_local < ERRAND_END_S)
        )
        n_err = int(errand.sum())
        if n_err:
            r_cell[errand] = day_rng.integers(0, len(cell_ids), n_err)
        r_ts = int(days[di]) * timebase.DAY_SECONDS - off_s + sec_local
        tac_today = np.where(multi[r_sim] & (di >= switch_day[r_sim]), second_tac[r_sim], sim_tac[r_sim])
        # "" writes as an empty CSV field, which ingest reads as missing
        tac_today = np.where(day_rng.random(len(r_sim)) < cfg.missing_tac_share, "", tac_today)
        rec_sim_parts.append(r_sim)
        rec_ts_parts.append(r_ts)
        rec_cell_parts.append(r_cell)
        rec_tac_parts.append(tac_today)

    r_sim = np.concatenate(rec_sim_parts)
    r_ts = np.concatenate(rec_ts_parts)
    r_cell = np.concatenate(rec_cell_parts)
    r_tac = np.concatenate(rec_tac_parts)
    del rec_sim_parts, rec_ts_parts, rec_cell_parts, rec_tac_parts

    age_vals = age[r_sim].astype(float)
    age_vals[age_missing[r_sim]] = np.nan
    df = pl.DataFrame(
        {
            "sim_id": sim_ids[r_sim],
            "timestamp": r_ts,
            "cell_id": cell_ids[r_cell],
            "customer_type": customer[r_sim],
            "subscription_type": subscription[r_sim],
            "age": age_vals,
            "gender": gender[r_sim],
            "tac": r_tac,
        }
    ).with_columns(pl.col("age").cast(pl.Int64, strict=False))
    if cfg.timestamp_format == "iso":
        df = df.with_columns(
            pl.from_epoch(pl.col("timestamp") + off_s, time_unit="s")
            .dt.strftime("%Y-%m-%dT%H:%M:%S")
            .alias("timestamp")
        )
    cdr_path = out / "cdr_wide.csv"
    df.write_csv(cdr_path)
    if cfg.n_malformed:
        mal_rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, 3)))
        with open(cdr_path, "a") as fh:
            for i in range(cfg.n_malformed):
                kind = i % 3
                t = int(days[0]) * timebase.DAY_SECONDS + int(mal_rng.integers(0, 86400))
                if kind == 0:
                    fh.write(f",{t},{cell_ids[0]},consumer,prepaid,33,F,\n")
                elif kind == 1:
                    fh.write(f"s{int(mal_rng.integers(0, n)):07d},not-a-time,{cell_ids[0]},consumer,prepaid,33,F,\n")
                else:
                    fh.write(f"s{int(mal_rng.integers(0, n)):07d},{t},,consumer,prepaid,33,F,\n")

    # --- estate ads --------------------------------------------------------------
    ads_rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, 4)))
    site_price_per_sqm = cfg.price_base_huf + price_rank * cfg.price_span_huf
    ads_path = out / "estate_ads.csv"
    with open(ads_path, "w") as fh:
        fh.write("lat,lon,floor_sqm,price_huf\n")
        for s in range(n_sites):
            n_ads = 3 + ads_rng.poisson(cfg.ads_per_site)
            for _ in range(n_ads):
                alat = site_lat[s] + ads_rng.uniform(-0.1, 0.1) / KM_PER_DEG_LAT
                alon = site_lon[s] + ads_rng.uniform(-0.1, 0.1) / km_per_deg_lon
                sqm = ads_rng.uniform(30, 100)
                pps = site_price_per_sqm[s] * ads_rng.lognormal(0.0, 0.05)
                fh.write(f"{alat:.7f},{alon:.7f},{sqm:.2f},{pps * sqm:.0f}\n")

    # --- ground truth --------------------------------------------------------------
    gt = GroundTruth(
        config=asdict(cfg),
        sites=[
            {
                "site_id": site_id_of[s],
                "lat": float(site_lat[s]),
                "lon": float(site_lon[s]),
                "price_rank": float(price_rank[s]),
                "price_per_sqm": float(site_price_per_sqm[s]),
                "wake_workday_min": (float(site_wake[s]) if not np.isnan(site_wake[s]) else None),
                "bed_workday_min": (float(site_bed[s]) if not np.isnan(site_bed[s]) else None),
                "wake_holiday_min": (
                    float(site_wake[s] + cfg.holiday_wake_shift_min) if not np.isnan(site_wake[s]) else None
                ),
                "bed_holiday_min": (
                    float(site_bed[s] + cfg.holiday_bed_shift_min) if not np.isnan(site_bed[s]) else None
                ),
                "work_start_min": float(site_work_start[s]),
                "work_end_min": float(site_work_end[s]),
                "low_volume": bool(low_volume[s]),
            }
            for s in range(n_sites)
        ],
        sim_ids=sim_ids.tolist(),
        home_site=[site_id_of[s] for s in home_site],
        work_site=[site_id_of[s] if w else "" for s, w in zip(work_site, is_worker)],
        is_worker=is_worker.tolist(),
        group_index=group_index.tolist(),
        wake_min=np.round(wake, 4).tolist(),
        bed_min=np.round(bed, 4).tolist(),
        dominant_tac=[str(t) for t in sim_tac],
        phone_price_eur=[None if np.isnan(p) else round(float(p), 2) for p in sim_price],
        phone_age_years=[None if np.isnan(a) else round(float(a), 4) for a in sim_age],
    )
    gt_path = out / "ground_truth.json"
    gt.to_json(gt_path)

    return {
        "cdr": str(cdr_path),
        "cells": str(cells_path),
        "calendar": str(calendar_path),
        "estate_ads": str(ads_path),
        "device_catalog": str(catalog_path),
        "ground_truth": str(gt_path),
    }
