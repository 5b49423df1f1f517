"""Pipeline driver: subcommands over one run directory.

Each subcommand reads the artifacts of its prerequisites and writes its
own, so a full run is `synth` (or your own input files) followed by
`ingest`, `tessellate`, `locate`, `mobility`, `circadian`,
`working-hours`, `ses`, `correlate`, `report`. Reruns on unchanged
inputs are byte-identical; no output embeds wall-clock time.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from . import circadian, geo, ingest, locations, mobility, ses, synthgen, timebase
from .config import RunConfig, ValidationError, load_config

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_MISSING = 3
EXIT_IO = 4

CITY_GROUP_KIND = "cell_based"
CITY_GROUP_ID = "all"


class MissingArtifact(Exception):
    """A required artifact is absent; maps to exit code 3."""

    def __init__(self, path: Path, producer: str):
        super().__init__(
            f"missing {path}; produce it with `chrono-cdr {producer}` first"
        )
        self.path = path
        self.producer = producer


def _require(path: Path, producer: str) -> Path:
    if not path.exists():
        raise MissingArtifact(path, producer)
    return path


# ---------------------------------------------------------------------------
# shared loaders

def _load_activity(cfg: RunConfig):
    path = _require(cfg.artifact("activity.csv"), "ingest")
    return ingest.read_activity_csv(path, tz_offset_minutes=cfg.tz_offset_minutes)


def _load_calendar(cfg: RunConfig, table) -> locations.Calendar:
    path = _require(cfg.path("calendar_json"), "synth")
    days = table.local_days()
    rng = (int(days.min()), int(days.max())) if len(days) else None
    return locations.Calendar.from_json(path, default_range=rng)


def _load_tessellation(cfg: RunConfig) -> geo.Tessellation:
    path = _require(cfg.path("cells_csv"), "synth")
    cells = geo.read_cells_csv(path)
    return geo.build_voronoi(geo.merge_cells_to_sites(cells)), cells


def _load_locations(cfg: RunConfig, table) -> locations.LocationTable:
    path = _require(cfg.artifact("locations.csv"), "locate")
    return locations.LocationTable.from_csv(path, table)


def _detect_cube(cfg: RunConfig, binned: circadian.BinnedActivity):
    params = circadian.EdgeParams(
        half_fraction=cfg.half_fraction,
        window=cfg.smooth_window,
        wake_search=tuple(cfg.wake_search),
        bed_search=tuple(cfg.bed_search),
    )
    cube = binned.smooth(cfg.smooth_window)
    floors = circadian.monthly_noise_floor(
        cube,
        min_counts=cfg.noise_floor_min_counts,
        peak_fraction=cfg.noise_floor_peak_fraction,
    )
    wake, bed = circadian.detect_edges_cube(cube, params, floors)
    return cube, wake, bed


# ---------------------------------------------------------------------------
# subcommands

def cmd_synth(cfg: RunConfig, threads: int) -> None:
    paths = synthgen.generate(cfg.scenario, cfg.run_dir)
    print(f"wrote {len(paths)} scenario files to {cfg.run_dir}")


def cmd_ingest(cfg: RunConfig, threads: int) -> None:
    src = _require(cfg.path("cdr_csv"), "synth")
    tables, report = ingest.load_cdr_csv(
        src,
        schema=cfg.schema,
        tz_offset_minutes=cfg.tz_offset_minutes,
        n_partitions=cfg.n_partitions,
    )
    if cfg.min_records or cfg.min_active_days:
        tables, _ = ingest.filter_sims(tables, cfg.min_records, cfg.min_active_days)
    ingest.write_artifacts(tables, report, cfg.run_dir, cfg.activity_histogram_edges)
    print(
        f"{report.lines} lines -> {len(tables.activity)} records, "
        f"{report.malformed} malformed"
    )


def cmd_tessellate(cfg: RunConfig, threads: int) -> None:
    tess, _cells = _load_tessellation(cfg)
    out = cfg.artifact("sites.geojson")
    out.write_text(json.dumps(tess.to_geojson(), sort_keys=True) + "\n")
    print(f"{len(tess)} sites -> {out}")


def cmd_locate(cfg: RunConfig, threads: int) -> None:
    act = _load_activity(cfg)
    cal = _load_calendar(cfg, act)
    act, dropped = locations.clip_to_calendar(act, cal)
    loc = locations.infer_locations(act, cal)
    loc.to_csv(cfg.artifact("locations.csv"))
    n_home = int((loc.home_code >= 0).sum())
    n_work = int((loc.work_code >= 0).sum())
    print(f"{len(loc)} sims: {n_home} homes, {n_work} workplaces"
          + (f" ({dropped} records outside calendar)" if dropped else ""))


def cmd_mobility(cfg: RunConfig, threads: int) -> None:
    act = _load_activity(cfg)
    tess, cells = _load_tessellation(cfg)
    coord = {c.cell_id: (c.centroid_lat, c.centroid_lon) for c in cells}
    lat = np.array([coord.get(str(c), (np.nan, np.nan))[0] for c in act.cell_ids])
    lon = np.array([coord.get(str(c), (np.nan, np.nan))[1] for c in act.cell_ids])
    daily, skipped = mobility.daily_mobility(act, lat, lon, projection=tess.projection)
    daily.to_csv(cfg.artifact("mobility_daily.csv"))
    days, gyr, ent = mobility.city_daily_mean(daily)
    sims_per_day = np.bincount(
        np.searchsorted(days, daily.days), minlength=len(days)
    )
    with open(cfg.artifact("mobility_city_daily.csv"), "w") as fh:
        fh.write("date,gyration_km,entropy,sims\n")
        for i in range(len(days)):
            fh.write(
                f"{timebase.day_to_date(int(days[i]))},{gyr[i]:.9f},"
                f"{ent[i]:.9f},{sims_per_day[i]}\n"
            )
    print(f"{len(daily)} sim-days over {len(days)} days"
          + (f" ({skipped} records with unknown cells skipped)" if skipped else ""))


def _binned_for_mode(cfg: RunConfig, act, cal, threads: int):
    """The configured grouping plus everything it needs."""
    loc = None
    c2s = None
    site_ids = None
    if cfg.circadian_mode in ("inhabitant_based", "worker_based"):
        loc = _load_locations(cfg, act).with_min_support(
            cfg.min_location_support, cfg.min_location_support
        )
    if cfg.circadian_level == "site":
        tess, _ = _load_tessellation(cfg)
        c2s = tess.site_codes_for(act.cell_ids)
        site_ids = tess.site_ids
    return circadian.bin_activity(
        act,
        cfg.circadian_mode,
        cal,
        loc,
        c2s,
        site_ids,
        level=cfg.circadian_level,
        threads=threads,
    )


def cmd_circadian(cfg: RunConfig, threads: int) -> None:
    act = _load_activity(cfg)
    cal = _load_calendar(cfg, act)
    act, _ = locations.clip_to_calendar(act, cal)

    binned = _binned_for_mode(cfg, act, cal, threads)
    _, wake, bed = _detect_cube(cfg, binned)

    # city-wide pooled series, used by correlate and the periodogram
    city = circadian.bin_activity(act, "cell_based", cal, level="all", threads=threads)
    _, cwake, cbed = _detect_cube(cfg, city)

    days = binned.day0 + np.arange(binned.n_days)
    circadian.write_edges_daily_csv(
        cfg.artifact("edges_daily.csv"), binned, wake, bed, cal,
        extra=(city, cwake, cbed),
    )

    summaries = []
    for gi in range(binned.n_groups):
        for klass in ("workday", "holiday", "all"):
            s = circadian.median_edges(
                wake[gi], bed[gi], days, cal, klass, str(binned.group_ids[gi])
            )
            if s is not None:
                summaries.append((binned.kind, s))
    for klass in ("workday", "holiday", "all"):
        s = circadian.median_edges(cwake[0], cbed[0], days, cal, klass, CITY_GROUP_ID)
        if s is not None:
            summaries.append((CITY_GROUP_KIND, s))
    with open(cfg.artifact("edges_summary.csv"), "w") as fh:
        fh.write("group_kind,group_id,day_class,n_days,wake_min,bed_min,day_length_min\n")
        for kind, s in summaries:
            fh.write(
                f"{kind},{s.group_id},{s.day_class},{s.n_days},"
                f"{s.wake_min:.3f},{s.bed_min:.3f},{s.day_length_min:.3f}\n"
            )

    heat = circadian.weekday_hour_heatmap(act)
    with open(cfg.artifact("heatmap.csv"), "w") as fh:
        fh.write("weekday,hour,count\n")
        for wd in range(7):
            for hr in range(24):
                fh.write(f"{wd},{hr},{heat[wd, hr]}\n")

    series = city.counts[0].ravel()
    periods, magnitude = circadian.periodogram(series)
    with open(cfg.artifact("periodogram.csv"), "w") as fh:
        fh.write("period_hours,magnitude\n")
        for p, m in zip(periods, magnitude):
            fh.write(f"{p:.9f},{m:.9f}\n")

    n_ok = int(np.isfinite(wake).sum())
    print(
        f"{binned.n_groups} groups x {binned.n_days} days: "
        f"{n_ok} detected wake edges; dominant period "
        f"{circadian.dominant_period(series):.1f} h"
    )


def cmd_working_hours(cfg: RunConfig, threads: int) -> None:
    act = _load_activity(cfg)
    cal = _load_calendar(cfg, act)
    act, _ = locations.clip_to_calendar(act, cal)
    loc = _load_locations(cfg, act).with_min_support(
        cfg.min_location_support, cfg.min_location_support
    )
    tess, _ = _load_tessellation(cfg)
    c2s = tess.site_codes_for(act.cell_ids)

    onsite = circadian.bin_activity(
        act, "worker_based", cal, loc, c2s, tess.site_ids,
        level="site", at_target_only=True, threads=threads,
    )
    params = circadian.EdgeParams(
        half_fraction=cfg.half_fraction,
        window=cfg.smooth_window,
        wake_search=tuple(cfg.wake_search),
        bed_search=tuple(cfg.bed_search),
    )
    rows = circadian.working_hours(
        onsite,
        cal,
        params,
        start_search=tuple(cfg.work_start_search),
        end_search=tuple(cfg.work_end_search),
        low_volume_factor=cfg.low_volume_factor,
    )
    rows.sort(key=lambda r: r.site_id)
    with open(cfg.artifact("working_hours.csv"), "w") as fh:
        fh.write("site_id,start_min,end_min,length_min,volume,confidence\n")
        for r in rows:
            conf = "low_volume" if r.low_confidence else "ok"
            if r.start_min is None:
                fh.write(f"{r.site_id},,,,{r.volume},{conf}\n")
            else:
                fh.write(
                    f"{r.site_id},{r.start_min:.3f},{r.end_min:.3f},"
                    f"{r.length_min:.3f},{r.volume},{conf}\n"
                )
    try:
        pairing = circadian.start_end_pairing(rows, k=cfg.pairing_k)
        payload = {
            "top_starts": pairing.top_starts,
            "top_ends": pairing.top_ends,
            "matrix": pairing.matrix.tolist(),
            "n_paired": pairing.n_paired,
        }
    except ValueError:
        payload = {"top_starts": [], "top_ends": [], "matrix": [], "n_paired": 0}
    cfg.artifact("pairing.json").write_text(json.dumps(payload, indent=1) + "\n")
    n_low = sum(r.low_confidence for r in rows)
    print(f"{len(rows)} sites, {n_low} low-confidence")


def _read_edges_summary(cfg: RunConfig) -> list[dict]:
    path = _require(cfg.artifact("edges_summary.csv"), "circadian")
    with open(path) as fh:
        return list(csv.DictReader(fh))


def cmd_ses(cfg: RunConfig, threads: int) -> None:
    act = _load_activity(cfg)
    loc = _load_locations(cfg, act).with_min_support(
        cfg.min_location_support, cfg.min_location_support
    )
    tess, _ = _load_tessellation(cfg)
    c2s = tess.site_codes_for(act.cell_ids)

    ads = ses.read_estate_ads(_require(cfg.path("estate_ads_csv"), "synth"))
    catalog = ses.read_device_catalog(_require(cfg.path("device_catalog_csv"), "synth"))
    devices = ingest.read_devices_csv(
        _require(cfg.artifact("devices.csv"), "ingest"), act.sim_ids
    )
    prices, ads_dropped = ses.site_price(ads, tess)

    month = cfg.dataset_month
    if not month:
        cal = _load_calendar(cfg, act)
        month = str(timebase.day_to_date(cal.start_day))[:7]
    profiles = ses.build_profiles(
        loc, prices, c2s, tess.site_ids, devices, catalog, dataset_month=month
    )
    profiles.to_csv(cfg.artifact("ses_profiles.csv"))

    # per-sim wake value: the home site's inhabitant workday median
    site_wake = {}
    for row in _read_edges_summary(cfg):
        if row["group_kind"] == "inhabitant_based" and row["day_class"] == "workday":
            site_wake[row["group_id"]] = float(row["wake_min"])
    if not site_wake:
        raise ValidationError(
            "edges_summary.csv has no inhabitant_based workday rows; "
            "run `chrono-cdr circadian` with circadian_mode=inhabitant_based, "
            "circadian_level=site"
        )
    site_wake_arr = np.full(len(tess.site_ids), np.nan)
    for i, sid in enumerate(tess.site_ids):
        if str(sid) in site_wake:
            site_wake_arr[i] = site_wake[str(sid)]
    home_site = np.where(loc.home_code >= 0, c2s[np.clip(loc.home_code, 0, None)], -1)
    sim_wake = np.where(home_site >= 0, site_wake_arr[np.clip(home_site, 0, None)], np.nan)

    rows_a = ses.assign_bins(profiles.home_price, cfg.property_bins_huf)
    cols_price = ses.assign_bins(profiles.phone_price, cfg.phone_price_bins_eur)
    age_capped = np.where(
        profiles.phone_age < ses.MAX_PHONE_AGE_YEARS, profiles.phone_age, np.nan
    )
    cols_age = ses.assign_bins(age_capped, cfg.phone_age_bins_years)

    mat_price = ses.wakeup_by_category(
        rows_a, cols_price, sim_wake, cfg.property_bins_huf, cfg.phone_price_bins_eur
    )
    mat_price.to_csv(cfg.artifact("ses_matrix_price.csv"))
    mat_age = ses.wakeup_by_category(
        rows_a, cols_age, sim_wake, cfg.property_bins_huf, cfg.phone_age_bins_years
    )
    mat_age.to_csv(cfg.artifact("ses_matrix_age.csv"))

    report = {
        "counters": profiles.counters,
        "ads_outside_area": ads_dropped,
        "priced_sites": len(prices),
        "dataset_month": month,
    }
    cfg.artifact("ses_report.json").write_text(json.dumps(report, indent=1, sort_keys=True) + "\n")
    print(
        f"{len(profiles.sim_ids)} profiles; "
        f"{int(mat_price.counts.sum())} sims in the price matrix"
    )


def cmd_correlate(cfg: RunConfig, threads: int) -> None:
    edges_path = _require(cfg.artifact("edges_daily.csv"), "circadian")
    city_path = _require(cfg.artifact("mobility_city_daily.csv"), "mobility")

    wake_by_date, bed_by_date = {}, {}
    with open(edges_path) as fh:
        for row in csv.DictReader(fh):
            if row["group_id"] == CITY_GROUP_ID and row["confidence"] == "ok":
                wake_by_date[row["date"]] = float(row["wake_min"])
                bed_by_date[row["date"]] = float(row["bed_min"])
    gyr_by_date, ent_by_date = {}, {}
    with open(city_path) as fh:
        for row in csv.DictReader(fh):
            gyr_by_date[row["date"]] = float(row["gyration_km"])
            ent_by_date[row["date"]] = float(row["entropy"])

    dates = sorted(set(wake_by_date) & set(gyr_by_date))
    if len(dates) < 2:
        raise ValidationError(
            "need at least 2 days present in both edges_daily.csv and "
            "mobility_city_daily.csv to correlate"
        )
    wake = mobility.minmax_normalize(np.array([wake_by_date[d] for d in dates]))
    bed = mobility.minmax_normalize(np.array([bed_by_date[d] for d in dates]))
    gyr = mobility.minmax_normalize(np.array([gyr_by_date[d] for d in dates]))
    ent = mobility.minmax_normalize(np.array([ent_by_date[d] for d in dates]))

    def safe_r(x, y) -> Optional[float]:
        try:
            return mobility.pearson_r(x, y)
        except ValueError:
            return None

    payload = {
        "n_days": len(dates),
        "r_wake_entropy": safe_r(wake, ent),
        "r_wake_gyration": safe_r(wake, gyr),
        "r_bed_entropy": safe_r(bed, ent),
        "r_bed_gyration": safe_r(bed, gyr),
    }
    cfg.artifact("correlate.json").write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")
    print(
        f"{len(dates)} days: r(wake,entropy)={payload['r_wake_entropy']}, "
        f"r(wake,gyration)={payload['r_wake_gyration']}"
    )


def cmd_report(cfg: RunConfig, threads: int) -> None:
    ingest_report = json.loads(
        _require(cfg.artifact("ingest_report.json"), "ingest").read_text()
    )
    edges_rows = _read_edges_summary(cfg)
    _require(cfg.artifact("locations.csv"), "locate")

    wh_rows = []
    with open(_require(cfg.artifact("working_hours.csv"), "working-hours")) as fh:
        wh_rows = list(csv.DictReader(fh))
    pairing = json.loads(_require(cfg.artifact("pairing.json"), "working-hours").read_text())
    correlations = json.loads(_require(cfg.artifact("correlate.json"), "correlate").read_text())
    ses_report = json.loads(_require(cfg.artifact("ses_report.json"), "ses").read_text())

    def matrix_rows(path: Path) -> list[dict]:
        with open(path) as fh:
            return list(csv.DictReader(fh))

    mat_price = matrix_rows(_require(cfg.artifact("ses_matrix_price.csv"), "ses"))
    mat_age = matrix_rows(_require(cfg.artifact("ses_matrix_age.csv"), "ses"))

    edges = {}
    for row in edges_rows:
        key = f"{row['group_kind']}:{row['group_id']}:{row['day_class']}"
        edges[key] = {
            "n_days": int(row["n_days"]),
            "wake_min": float(row["wake_min"]),
            "bed_min": float(row["bed_min"]),
            "day_length_min": float(row["day_length_min"]),
        }

    detected = [r for r in wh_rows if r["start_min"]]
    wh_summary = {
        "n_sites": len(wh_rows),
        "n_low_confidence": sum(r["confidence"] != "ok" for r in wh_rows),
        "median_start_min": _median([float(r["start_min"]) for r in detected]),
        "median_end_min": _median([float(r["end_min"]) for r in detected]),
        "median_length_min": _median([float(r["length_min"]) for r in detected]),
        "top_starts": pairing["top_starts"],
        "top_ends": pairing["top_ends"],
    }

    summary = {
        "ingest": {
            k: ingest_report[k]
            for k in ("lines", "records", "malformed", "n_sims", "n_cells")
        },
        "edges": edges,
        "working_hours": wh_summary,
        "correlations": correlations,
        "ses": {
            "matrix_price": mat_price,
            "matrix_age": mat_age,
            **ses_report,
        },
        "config": cfg.effective(),
    }
    out = cfg.artifact("summary.json")
    out.write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n")
    print(f"wrote {out}")


def _median(values: list) -> Optional[float]:
    if not values:
        return None
    v = sorted(values)
    return v[(len(v) - 1) // 2]


# ---------------------------------------------------------------------------
# entry point

COMMANDS = {
    "synth": cmd_synth,
    "ingest": cmd_ingest,
    "tessellate": cmd_tessellate,
    "locate": cmd_locate,
    "mobility": cmd_mobility,
    "circadian": cmd_circadian,
    "working-hours": cmd_working_hours,
    "ses": cmd_ses,
    "correlate": cmd_correlate,
    "report": cmd_report,
}


def main(argv: Optional[list] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="chrono-cdr",
        description="Reconstruct circadian indicators from call detail records.",
    )
    parser.add_argument("subcommand", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="path to run.json")
    parser.add_argument("--threads", type=int, default=None, help="worker cap (default from config)")
    parser.add_argument("--json-errors", action="store_true", help="machine-readable errors on stderr")
    args = parser.parse_args(argv)

    def fail(code: int, message: str, **extra) -> int:
        if args.json_errors:
            payload = {"error": message, "exit_code": code, **extra}
            print(json.dumps(payload, sort_keys=True), file=sys.stderr)
        else:
            print(f"error: {message}", file=sys.stderr)
        return code

    try:
        cfg = load_config(args.config)
    except ValidationError as e:
        return fail(EXIT_VALIDATION, str(e))
    except OSError as e:
        return fail(EXIT_IO, f"cannot read config {args.config}: {e}")

    threads = args.threads if args.threads is not None else cfg.threads
    if threads < 1:
        return fail(EXIT_VALIDATION, "--threads must be >= 1")

    try:
        COMMANDS[args.subcommand](cfg, threads)
    except MissingArtifact as e:
        return fail(EXIT_MISSING, str(e), producer=e.producer)
    except ValidationError as e:
        return fail(EXIT_VALIDATION, str(e))
    except ValueError as e:
        return fail(EXIT_VALIDATION, str(e))
    except OSError as e:
        return fail(EXIT_IO, str(e))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
