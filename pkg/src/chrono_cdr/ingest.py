"""CDR ingestion: parsing, validation, and normalization into columnar tables.

Two independent parsing routes cover the wide CSV format:

* :func:`parse_cdr_stream` - a line-by-line reference parser built on the
  csv module. Handles epoch and ISO-8601 timestamps (including explicit
  UTC offsets) and never holds more than one row in memory.
* :func:`load_cdr_csv` - a bulk columnar loader built on polars for large
  files. Supports epoch and naive-ISO timestamps (explicit offsets only
  exist on the stream route).

Both routes apply the same validation rules and feed the same
normalization core, and the test suite asserts they produce identical
tables on the shared format subset.

A malformed line is counted and skipped, never fatal: missing or empty
sim_id / cell_id, or an unparseable timestamp. A missing required column
in the header is a schema error and aborts. Optional subscriber fields
never invalidate a line; unusable values just count as unknown.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Optional, Sequence, TextIO, Union

import numpy as np
import polars as pl

from . import timebase
from .tables import (
    UNKNOWN,
    ActivityTable,
    DeviceTable,
    SubscriberTable,
    encode_ids,
    recode_to_sorted,
)

REQUIRED_COLUMNS = ("sim_id", "timestamp", "cell_id")
OPTIONAL_COLUMNS = ("customer_type", "subscription_type", "age", "gender", "tac")
DEFAULT_SCHEMA = {name: name for name in REQUIRED_COLUMNS + OPTIONAL_COLUMNS}

CUSTOMER_TYPES = ("business", "consumer")
SUBSCRIPTION_TYPES = ("prepaid", "postpaid")
AGE_MIN, AGE_MAX = 0, 120


class SchemaError(ValueError):
    """The input header lacks a required column."""


@dataclass(slots=True)
class CdrRecord:
    """One parsed activity row, subscriber attributes already normalized."""

    sim_id: str
    timestamp: int          # UTC epoch seconds, truncated to the 10 s tick
    cell_id: str
    customer_type: str = UNKNOWN
    subscription_type: str = UNKNOWN
    age: Optional[int] = None
    gender: str = UNKNOWN
    tac: Optional[str] = None


@dataclass
class ParseReport:
    """Row accounting for one parse run. lines == records + malformed."""

    lines: int = 0
    records: int = 0
    malformed: int = 0
    malformed_reasons: dict = field(default_factory=dict)

    def count_bad(self, reason: str) -> None:
        self.malformed += 1
        self.malformed_reasons[reason] = self.malformed_reasons.get(reason, 0) + 1


@dataclass
class NormalizedTables:
    activity: ActivityTable
    subscribers: SubscriberTable
    devices: DeviceTable
    conflicts: dict = field(default_factory=dict)  # attribute -> n sims with contradictions

    def filter_sims_mask(self, keep: np.ndarray) -> "NormalizedTables":
        """Drop all rows of sims where ``keep[sim_code]`` is False (pools kept)."""
        act = self.activity.take(keep[self.activity.sim_codes])
        dev = self.devices
        dev_mask = keep[dev.sim_codes]
        return NormalizedTables(
            activity=act,
            subscribers=self.subscribers,
            devices=DeviceTable(
                sim_codes=dev.sim_codes[dev_mask],
                tacs=dev.tacs[dev_mask],
                first_seen=dev.first_seen[dev_mask],
                last_seen=dev.last_seen[dev_mask],
            ),
            conflicts=self.conflicts,
        )


def _norm_enum(raw: Optional[str], allowed: Sequence[str]) -> str:
    if raw is None:
        return UNKNOWN
    value = raw.strip().lower()
    return value if value in allowed else UNKNOWN


def _norm_age(raw: Optional[str]) -> Optional[int]:
    if raw is None or raw.strip() == "":
        return None
    try:
        age = int(raw)
    except ValueError:
        return None
    return age if AGE_MIN <= age <= AGE_MAX else None


def _norm_gender(raw: Optional[str]) -> str:
    if raw is None:
        return UNKNOWN
    value = raw.strip().upper()
    return value if value else UNKNOWN


def parse_cdr_stream(
    source: Union[str, Path, Iterable[str], TextIO],
    schema: Optional[dict] = None,
    tz_offset_minutes: int = timebase.DEFAULT_TZ_OFFSET_MINUTES,
    report: Optional[ParseReport] = None,
) -> Iterator[CdrRecord]:
    """Yield validated records from a wide-format CSV, skipping malformed lines.

    ``schema`` maps canonical field names to the column headers actually
    present; unmapped canonical names fall back to themselves. Extra
    columns are ignored. Raises :class:`SchemaError` if a required column
    is missing from the header.
    """
    colmap = dict(DEFAULT_SCHEMA)
    if schema:
        colmap.update(schema)

    own = isinstance(source, (str, Path))
    fh = open(source, "r", newline="") if own else source
    try:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError("empty input: no header row")
        position = {name: i for i, name in enumerate(header)}
        missing = [c for c in REQUIRED_COLUMNS if colmap[c] not in position]
        if missing:
            raise SchemaError(f"missing required column(s): {', '.join(missing)}")
        idx = {c: position.get(colmap[c]) for c in REQUIRED_COLUMNS + OPTIONAL_COLUMNS}

        def get(row: list, col: str) -> Optional[str]:
            i = idx[col]
            if i is None or i >= len(row):
                return None
            return row[i]

        for row in reader:
            if report is not None:
                report.lines += 1
            sim = get(row, "sim_id")
            cell = get(row, "cell_id")
            raw_ts = get(row, "timestamp")
            if not sim:
                if report is not None:
                    report.count_bad("empty_sim_id")
                continue
            if not cell:
                if report is not None:
                    report.count_bad("empty_cell_id")
                continue
            if not raw_ts:
                if report is not None:
                    report.count_bad("bad_timestamp")
                continue
            try:
                ts = timebase.parse_timestamp(raw_ts, tz_offset_minutes)
            except ValueError:
                if report is not None:
                    report.count_bad("bad_timestamp")
                continue
            if report is not None:
                report.records += 1
            tac = get(row, "tac")
            yield CdrRecord(
                sim_id=sim,
                timestamp=ts,
                cell_id=cell,
                customer_type=_norm_enum(get(row, "customer_type"), CUSTOMER_TYPES),
                subscription_type=_norm_enum(get(row, "subscription_type"), SUBSCRIPTION_TYPES),
                age=_norm_age(get(row, "age")),
                gender=_norm_gender(get(row, "gender")),
                tac=tac if tac else None,
            )
    finally:
        if own:
            fh.close()


def _first_known_per_segment(
    codes_sorted: np.ndarray,
    starts: np.ndarray,
    sizes: np.ndarray,
    unknown_code: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Per segment: code of first entry != unknown_code, plus a conflict flag.

    A segment conflicts when some entry is known and differs from the winner.
    """
    n = len(codes_sorted)
    known = codes_sorted != unknown_code
    position = np.where(known, np.arange(n, dtype=np.int64), n)
    first_idx = np.minimum.reduceat(position, starts)
    has_known = first_idx < n
    winner = np.where(has_known, codes_sorted[np.minimum(first_idx, n - 1)], unknown_code)
    winner_by_row = np.repeat(winner, sizes)
    disagrees = known & (codes_sorted != winner_by_row)
    conflict = np.add.reduceat(disagrees.astype(np.int64), starts) > 0
    return winner, conflict


def _build_subscribers(
    sim_codes: np.ndarray,
    n_sims: int,
    sim_pool: np.ndarray,
    cust_codes: np.ndarray,
    cust_pool: np.ndarray,
    sub_codes: np.ndarray,
    sub_pool: np.ndarray,
    gender_codes: np.ndarray,
    gender_pool: np.ndarray,
    ages: np.ndarray,
) -> tuple[SubscriberTable, dict]:
    order = np.argsort(sim_codes, kind="stable")  # file order within each sim
    sorted_sims = sim_codes[order]
    boundary = np.empty(len(order), dtype=bool)
    boundary[0] = True
    boundary[1:] = sorted_sims[1:] != sorted_sims[:-1]
    starts = np.nonzero(boundary)[0]
    sizes = np.diff(np.append(starts, len(order)))
    seg_sims = sorted_sims[starts]

    conflicts: dict = {}

    def resolve(codes: np.ndarray, pool: np.ndarray, unknown_value: str, attr: str) -> np.ndarray:
        unknown_code = int(np.searchsorted(pool, unknown_value))
        if unknown_code >= len(pool) or pool[unknown_code] != unknown_value:
            pool = np.append(pool, unknown_value)
            order_p = np.argsort(pool)
            rank = np.empty(len(pool), dtype=np.int32)
            rank[order_p] = np.arange(len(pool), dtype=np.int32)
            codes = rank[codes]
            pool = pool[order_p]
            unknown_code = int(np.searchsorted(pool, unknown_value))
        winner, conflict = _first_known_per_segment(codes[order], starts, sizes, unknown_code)
        conflicts[attr] = int(conflict.sum())
        out = np.full(n_sims, unknown_value, dtype=pool.dtype)
        out[seg_sims] = pool[winner]
        return out

    customer = resolve(cust_codes, cust_pool, UNKNOWN, "customer_type")
    subscription = resolve(sub_codes, sub_pool, UNKNOWN, "subscription_type")
    gender = resolve(gender_codes, gender_pool, UNKNOWN, "gender")

    age_winner, age_conflict = _first_known_per_segment(
        ages[order].astype(np.int64), starts, sizes, unknown_code=-1
    )
    conflicts["age"] = int(age_conflict.sum())
    age_out = np.full(n_sims, -1, dtype=np.int16)
    age_out[seg_sims] = age_winner.astype(np.int16)

    return (
        SubscriberTable(
            sim_ids=sim_pool,
            customer_type=customer,
            subscription_type=subscription,
            age=age_out,
            gender=gender,
        ),
        conflicts,
    )


def _build_devices(
    sim_codes: np.ndarray,
    times: np.ndarray,
    tac_codes: np.ndarray,
    tac_pool: np.ndarray,
) -> DeviceTable:
    """Maximal runs of consecutive same-TAC records, per sim in time order.

    Records without a TAC are invisible here: they neither start nor break
    a run.
    """
    has_tac = tac_codes >= 0
    if not has_tac.any():
        empty = np.empty(0, dtype=np.int64)
        return DeviceTable(
            sim_codes=np.empty(0, dtype=np.int32),
            tacs=np.empty(0, dtype=tac_pool.dtype if len(tac_pool) else "<U8"),
            first_seen=empty,
            last_seen=empty.copy(),
        )
    rows = np.nonzero(has_tac)[0]
    sims = sim_codes[rows]
    ts = times[rows]
    tacs = tac_codes[rows]
    order = np.lexsort((rows, ts, sims))
    sims, ts, tacs = sims[order], ts[order], tacs[order]
    new_run = np.empty(len(sims), dtype=bool)
    new_run[0] = True
    new_run[1:] = (sims[1:] != sims[:-1]) | (tacs[1:] != tacs[:-1])
    starts = np.nonzero(new_run)[0]
    ends = np.append(starts[1:], len(sims)) - 1
    return DeviceTable(
        sim_codes=sims[starts],
        tacs=tac_pool[tacs[starts]],
        first_seen=ts[starts],
        last_seen=ts[ends],
    )


def _assemble(
    sim_codes: np.ndarray,
    sim_pool: np.ndarray,
    times: np.ndarray,
    cell_codes: np.ndarray,
    cell_pool: np.ndarray,
    cust_codes: np.ndarray,
    cust_pool: np.ndarray,
    sub_codes: np.ndarray,
    sub_pool: np.ndarray,
    gender_codes: np.ndarray,
    gender_pool: np.ndarray,
    ages: np.ndarray,
    tac_codes: np.ndarray,
    tac_pool: np.ndarray,
    tz_offset_minutes: int,
    n_partitions: int = 1,
) -> NormalizedTables:
    """Build the three normalized tables; partitionable by sim hash.

    With ``n_partitions > 1`` each sim is processed in exactly one
    partition and the partial results merged; output is byte-identical
    for any partition count because every per-sim result is written to a
    slot determined by the sim code alone.
    """
    activity = ActivityTable(
        sim_codes=sim_codes,
        times=times,
        cell_codes=cell_codes,
        sim_ids=sim_pool,
        cell_ids=cell_pool,
        tz_offset_minutes=tz_offset_minutes,
    )
    n_sims = len(sim_pool)

    if n_partitions <= 1 or n_sims == 0:
        if len(sim_codes) == 0:
            subscribers = SubscriberTable(
                sim_ids=sim_pool,
                customer_type=np.full(n_sims, UNKNOWN),
                subscription_type=np.full(n_sims, UNKNOWN),
                age=np.full(n_sims, -1, dtype=np.int16),
                gender=np.full(n_sims, UNKNOWN),
            )
            devices = _build_devices(sim_codes, times, tac_codes, tac_pool)
            return NormalizedTables(activity, subscribers, devices, {})
        subscribers, conflicts = _build_subscribers(
            sim_codes, n_sims, sim_pool,
            cust_codes, cust_pool, sub_codes, sub_pool,
            gender_codes, gender_pool, ages,
        )
        devices = _build_devices(sim_codes, times, tac_codes, tac_pool)
        return NormalizedTables(activity, subscribers, devices, conflicts)

    part_of_sim = sim_codes % n_partitions
    owner = np.arange(n_sims, dtype=np.int64) % n_partitions
    customer = np.full(n_sims, UNKNOWN, dtype=object)
    subscription = np.full(n_sims, UNKNOWN, dtype=object)
    gender = np.full(n_sims, UNKNOWN, dtype=object)
    age = np.full(n_sims, -1, dtype=np.int16)
    conflicts_total: dict = {}
    device_parts = []
    for p in range(n_partitions):
        rows = np.nonzero(part_of_sim == p)[0]
        if len(rows) == 0:
            continue
        subs, confl = _build_subscribers(
            sim_codes[rows], n_sims, sim_pool,
            cust_codes[rows], cust_pool, sub_codes[rows], sub_pool,
            gender_codes[rows], gender_pool, ages[rows],
        )
        owned = owner == p
        customer[owned] = subs.customer_type[owned]
        subscription[owned] = subs.subscription_type[owned]
        gender[owned] = subs.gender[owned]
        age[owned] = subs.age[owned]
        for k, v in confl.items():
            conflicts_total[k] = conflicts_total.get(k, 0) + v
        device_parts.append(_build_devices(sim_codes[rows], times[rows], tac_codes[rows], tac_pool))

    subscribers = SubscriberTable(
        sim_ids=sim_pool,
        customer_type=np.asarray(customer, dtype=str),
        subscription_type=np.asarray(subscription, dtype=str),
        age=age,
        gender=np.asarray(gender, dtype=str),
    )
    dev_sims = np.concatenate([d.sim_codes for d in device_parts]) if device_parts else np.empty(0, np.int32)
    dev_order = np.argsort(dev_sims, kind="stable")
    devices = DeviceTable(
        sim_codes=dev_sims[dev_order],
        tacs=np.concatenate([d.tacs for d in device_parts])[dev_order] if device_parts else np.empty(0, "<U8"),
        first_seen=np.concatenate([d.first_seen for d in device_parts])[dev_order] if device_parts else np.empty(0, np.int64),
        last_seen=np.concatenate([d.last_seen for d in device_parts])[dev_order] if device_parts else np.empty(0, np.int64),
    )
    return NormalizedTables(activity, subscribers, devices, conflicts_total)


def normalize_tables(
    records: Iterable[CdrRecord],
    tz_offset_minutes: int = timebase.DEFAULT_TZ_OFFSET_MINUTES,
    n_partitions: int = 1,
) -> NormalizedTables:
    """Normalize a stream of parsed records into activity/subscriber/device tables.

    Subscriber attributes follow a first-known-wins rule per attribute;
    later contradictions are only counted. Device intervals are maximal
    consecutive same-TAC runs per sim in time order.
    """
    sims: list[str] = []
    ts: list[int] = []
    cells: list[str] = []
    custs: list[str] = []
    subs: list[str] = []
    genders: list[str] = []
    ages: list[int] = []
    tacs: list[str] = []
    for r in records:
        sims.append(r.sim_id)
        ts.append(r.timestamp)
        cells.append(r.cell_id)
        custs.append(r.customer_type)
        subs.append(r.subscription_type)
        genders.append(r.gender)
        ages.append(-1 if r.age is None else r.age)
        tacs.append("" if r.tac is None else r.tac)

    sim_codes, sim_pool = encode_ids(sims) if sims else (np.empty(0, np.int32), np.empty(0, "<U1"))
    cell_codes, cell_pool = encode_ids(cells) if cells else (np.empty(0, np.int32), np.empty(0, "<U1"))
    cust_codes, cust_pool = encode_ids(custs) if custs else (np.empty(0, np.int32), np.array([UNKNOWN]))
    sub_codes, sub_pool = encode_ids(subs) if subs else (np.empty(0, np.int32), np.array([UNKNOWN]))
    gender_codes, gender_pool = encode_ids(genders) if genders else (np.empty(0, np.int32), np.array([UNKNOWN]))
    raw_tac_codes, raw_tac_pool = encode_ids(tacs) if tacs else (np.empty(0, np.int32), np.empty(0, "<U1"))
    # "" encodes a missing TAC; shift codes so -1 means missing
    if len(raw_tac_pool) and raw_tac_pool[0] == "":
        tac_codes = raw_tac_codes - 1
        tac_pool = raw_tac_pool[1:]
    else:
        tac_codes, tac_pool = raw_tac_codes, raw_tac_pool

    return _assemble(
        sim_codes, sim_pool,
        np.asarray(ts, dtype=np.int64),
        cell_codes, cell_pool,
        cust_codes, cust_pool,
        sub_codes, sub_pool,
        gender_codes, gender_pool,
        np.asarray(ages, dtype=np.int64),
        tac_codes, tac_pool,
        tz_offset_minutes,
        n_partitions=n_partitions,
    )


def _codes_from_utf8(col: pl.Series) -> tuple[np.ndarray, np.ndarray]:
    cat = col.cast(pl.Categorical)
    codes = cat.to_physical().to_numpy().astype(np.int64)
    cats = cat.cat.get_categories().to_numpy().astype(str)
    if len(cats) == 0:
        return codes.astype(np.int32), cats
    sorted_codes, sorted_pool = recode_to_sorted(codes.astype(np.int32), cats)
    return sorted_codes, sorted_pool


def _enum_codes(col: pl.Series, allowed: Sequence[str], upper: bool = False) -> tuple[np.ndarray, np.ndarray]:
    cleaned = col.str.strip_chars()
    cleaned = cleaned.str.to_uppercase() if upper else cleaned.str.to_lowercase()
    if allowed:
        cleaned = (
            pl.DataFrame({"v": cleaned})
            .with_columns(
                pl.when(pl.col("v").is_in(list(allowed)))
                .then(pl.col("v"))
                .otherwise(pl.lit(UNKNOWN))
                .alias("v")
            )["v"]
        )
    else:
        cleaned = (
            pl.DataFrame({"v": cleaned})
            .with_columns(
                pl.when(pl.col("v").is_null() | (pl.col("v") == ""))
                .then(pl.lit(UNKNOWN))
                .otherwise(pl.col("v"))
                .alias("v")
            )["v"]
        )
    cleaned = cleaned.fill_null(UNKNOWN)
    return _codes_from_utf8(cleaned)


def load_cdr_csv(
    path: Union[str, Path],
    schema: Optional[dict] = None,
    tz_offset_minutes: int = timebase.DEFAULT_TZ_OFFSET_MINUTES,
    n_partitions: int = 1,
) -> tuple[NormalizedTables, ParseReport]:
    """Bulk-load a wide-format CSV and normalize it in one pass.

    Timestamps may be epoch seconds or naive ISO-8601 local time; rows
    polars reads as ragged are padded/truncated, and the usual validation
    then applies field by field.
    """
    colmap = dict(DEFAULT_SCHEMA)
    if schema:
        colmap.update(schema)

    df = pl.read_csv(
        path,
        infer_schema_length=0,  # everything Utf8; parsing is explicit below
        truncate_ragged_lines=True,
        null_values=[""],
    )
    report = ParseReport(lines=df.height)

    position = set(df.columns)
    missing = [c for c in REQUIRED_COLUMNS if colmap[c] not in position]
    if missing:
        raise SchemaError(f"missing required column(s): {', '.join(missing)}")

    def col(name: str) -> Optional[pl.Series]:
        actual = colmap[name]
        return df[actual] if actual in position else None

    raw_ts = col("timestamp")
    epoch = raw_ts.cast(pl.Int64, strict=False)
    iso = (
        raw_ts.str.to_datetime("%Y-%m-%dT%H:%M:%S", strict=False, time_unit="ms")
        .dt.epoch("s")
        .cast(pl.Int64)
        - tz_offset_minutes * 60
    )
    ts = pl.DataFrame({"e": epoch, "i": iso}).select(
        pl.coalesce(pl.col("e"), pl.col("i")).alias("t")
    )["t"]
    ts = ts - (((ts % 10) + 10) % 10)  # floor to the 10 s tick, sign-safe

    sim = col("sim_id")
    cell = col("cell_id")
    bad_sim = sim.is_null()
    bad_cell = (~bad_sim) & cell.is_null()
    bad_ts = (~bad_sim) & (~bad_cell) & ts.is_null()
    good = ~(bad_sim | bad_cell | bad_ts)

    n_bad_sim = int(bad_sim.sum())
    n_bad_cell = int(bad_cell.sum())
    n_bad_ts = int(bad_ts.sum())
    if n_bad_sim:
        report.malformed_reasons["empty_sim_id"] = n_bad_sim
    if n_bad_cell:
        report.malformed_reasons["empty_cell_id"] = n_bad_cell
    if n_bad_ts:
        report.malformed_reasons["bad_timestamp"] = n_bad_ts
    report.malformed = n_bad_sim + n_bad_cell + n_bad_ts
    report.records = int(good.sum())

    keep = pl.DataFrame(
        {
            "sim": sim,
            "ts": ts,
            "cell": cell,
        }
    ).filter(good)

    sim_codes, sim_pool = _codes_from_utf8(keep["sim"])
    cell_codes, cell_pool = _codes_from_utf8(keep["cell"])
    times = keep["ts"].to_numpy().astype(np.int64)

    n = report.records

    def optional_enum(name: str, allowed: Sequence[str], upper: bool = False):
        series = col(name)
        if series is None:
            return np.zeros(n, dtype=np.int32), np.array([UNKNOWN])
        return _enum_codes(series.filter(good), allowed, upper=upper)

    cust_codes, cust_pool = optional_enum("customer_type", CUSTOMER_TYPES)
    sub_codes, sub_pool = optional_enum("subscription_type", SUBSCRIPTION_TYPES)
    gender_codes, gender_pool = optional_enum("gender", (), upper=True)

    age_series = col("age")
    if age_series is None:
        ages = np.full(n, -1, dtype=np.int64)
    else:
        parsed = age_series.filter(good).cast(pl.Int64, strict=False)
        ages = parsed.fill_null(-1).to_numpy().astype(np.int64)
        ages[(ages < AGE_MIN) | (ages > AGE_MAX)] = -1

    tac_series = col("tac")
    if tac_series is None:
        tac_codes = np.full(n, -1, dtype=np.int32)
        tac_pool = np.empty(0, dtype="<U8")
    else:
        filled = tac_series.filter(good).fill_null("")
        raw_codes, raw_pool = _codes_from_utf8(filled)
        if len(raw_pool) and raw_pool[0] == "":
            tac_codes, tac_pool = raw_codes - 1, raw_pool[1:]
        else:
            tac_codes, tac_pool = raw_codes, raw_pool

    tables = _assemble(
        sim_codes, sim_pool, times, cell_codes, cell_pool,
        cust_codes, cust_pool, sub_codes, sub_pool,
        gender_codes, gender_pool, ages, tac_codes, tac_pool,
        tz_offset_minutes, n_partitions=n_partitions,
    )
    return tables, report


@dataclass
class FilterReport:
    """Who was dropped by the minimum-activity filters, and why."""

    kept_sims: int = 0
    excluded_low_records: int = 0
    excluded_low_active_days: int = 0
    kept_records: int = 0
    dropped_records: int = 0


def filter_sims(
    tables: NormalizedTables,
    min_records: int = 0,
    min_active_days: int = 0,
) -> tuple[NormalizedTables, FilterReport]:
    """Drop sims below the record / active-day floors; report the counts.

    A sim failing both floors is counted once, under the record floor.
    """
    act = tables.activity
    n_sims = act.n_sims
    counts = np.bincount(act.sim_codes, minlength=n_sims)

    days = act.local_days()
    if len(days):
        day0 = int(days.min())
        span = int(days.max()) - day0 + 1
        pair = act.sim_codes.astype(np.int64) * span + (days - day0)
        uniq = np.unique(pair)
        active_days = np.bincount((uniq // span).astype(np.int64), minlength=n_sims)
    else:
        active_days = np.zeros(n_sims, dtype=np.int64)

    low_rec = counts < min_records
    low_days = (~low_rec) & (active_days < min_active_days)
    keep = ~(low_rec | low_days)
    # sims absent from the activity table (count 0) only matter if floors > 0
    if min_records == 0 and min_active_days == 0:
        keep[:] = True

    filtered = tables.filter_sims_mask(keep)
    report = FilterReport(
        kept_sims=int(keep.sum()),
        excluded_low_records=int(low_rec.sum()),
        excluded_low_active_days=int(low_days.sum()),
        kept_records=len(filtered.activity),
        dropped_records=len(act) - len(filtered.activity),
    )
    return filtered, report


@dataclass
class ActivityHistogram:
    """Sims and activity share per record-count bucket.

    Buckets are (0, e1], (e1, e2], ..., (ek, inf) over per-sim record
    counts; sims with zero records never appear in the table at all.
    """

    bucket_edges: tuple
    sim_counts: list
    activity_share: list

    def labels(self) -> list[str]:
        edges = self.bucket_edges
        out = []
        lo = 0
        for e in edges:
            out.append(f"({lo}, {e}]")
            lo = e
        out.append(f"({lo}, inf)")
        return out


@dataclass
class ActiveDaysHistogram:
    days: list       # distinct active-day counts
    sim_counts: list


def activity_histograms(
    table: ActivityTable,
    bucket_edges: Sequence[int] = (1, 2, 5, 10, 20, 50, 100, 200, 500, 1000),
) -> tuple[ActivityHistogram, ActiveDaysHistogram]:
    """Histogram per-sim record counts into buckets, plus active-day counts."""
    edges = tuple(sorted(bucket_edges))
    counts = np.bincount(table.sim_codes, minlength=table.n_sims)
    present = counts > 0
    per_sim = counts[present]
    bucket = np.searchsorted(np.asarray(edges), per_sim, side="left")
    n_buckets = len(edges) + 1
    sims_per_bucket = np.bincount(bucket, minlength=n_buckets)
    records_per_bucket = np.bincount(bucket, weights=per_sim, minlength=n_buckets)
    total = per_sim.sum()
    share = records_per_bucket / total if total > 0 else np.zeros(n_buckets)

    days = table.local_days()
    if len(days):
        day0 = int(days.min())
        span = int(days.max()) - day0 + 1
        pair = table.sim_codes.astype(np.int64) * span + (days - day0)
        uniq = np.unique(pair)
        active = np.bincount((uniq // span).astype(np.int64), minlength=table.n_sims)
        active = active[active > 0]
        values, value_counts = np.unique(active, return_counts=True)
    else:
        values, value_counts = np.empty(0, np.int64), np.empty(0, np.int64)

    return (
        ActivityHistogram(
            bucket_edges=edges,
            sim_counts=[int(x) for x in sims_per_bucket],
            activity_share=[float(x) for x in share],
        ),
        ActiveDaysHistogram(
            days=[int(v) for v in values],
            sim_counts=[int(c) for c in value_counts],
        ),
    )


# ---------------------------------------------------------------------------
# run-directory artifacts

def write_artifacts(
    tables: NormalizedTables,
    report: ParseReport,
    out_dir: Union[str, Path],
    histogram_edges: Sequence[int] = (1, 2, 5, 10, 20, 50, 100, 200, 500, 1000),
) -> dict:
    """Write activity.csv, subscribers.csv, devices.csv, ingest_report.json."""
    out = Path(out_dir)
    act = tables.activity
    paths = {
        "activity": out / "activity.csv",
        "subscribers": out / "subscribers.csv",
        "devices": out / "devices.csv",
        "report": out / "ingest_report.json",
    }
    pl.DataFrame(
        {
            "sim_id": act.sim_ids[act.sim_codes],
            "timestamp": act.times,
            "cell_id": act.cell_ids[act.cell_codes],
        }
    ).write_csv(paths["activity"])

    subs = tables.subscribers
    age = subs.age.astype(float)
    age[subs.age < 0] = np.nan
    pl.DataFrame(
        {
            "sim_id": subs.sim_ids,
            "customer_type": subs.customer_type,
            "subscription_type": subs.subscription_type,
            "age": age,
            "gender": subs.gender,
        }
    ).with_columns(pl.col("age").cast(pl.Int64, strict=False)).write_csv(paths["subscribers"])

    dev = tables.devices
    pl.DataFrame(
        {
            "sim_id": act.sim_ids[dev.sim_codes],
            "tac": dev.tacs,
            "first_seen": dev.first_seen,
            "last_seen": dev.last_seen,
        }
    ).write_csv(paths["devices"])

    hist, days_hist = activity_histograms(act, tuple(histogram_edges))
    payload = {
        "lines": report.lines,
        "records": report.records,
        "malformed": report.malformed,
        "malformed_reasons": dict(sorted(report.malformed_reasons.items())),
        "subscriber_conflicts": dict(sorted(tables.conflicts.items())),
        "n_sims": int(act.n_sims),
        "n_cells": int(act.n_cells),
        "tz_offset_minutes": act.tz_offset_minutes,
        "activity_histogram": {
            "labels": hist.labels(),
            "sim_counts": hist.sim_counts,
            "activity_share": hist.activity_share,
        },
        "active_days_histogram": {
            "days": days_hist.days,
            "sim_counts": days_hist.sim_counts,
        },
    }
    paths["report"].write_text(json.dumps(payload, indent=1) + "\n")
    return {k: str(v) for k, v in paths.items()}


def read_activity_csv(
    path: Union[str, Path],
    tz_offset_minutes: int = timebase.DEFAULT_TZ_OFFSET_MINUTES,
) -> ActivityTable:
    """Reload an activity.csv artifact (epoch timestamps, already clean)."""
    df = pl.read_csv(
        path,
        schema_overrides={"sim_id": pl.Utf8, "timestamp": pl.Int64, "cell_id": pl.Utf8},
    )
    sim_codes, sim_pool = _codes_from_utf8(df["sim_id"])
    cell_codes, cell_pool = _codes_from_utf8(df["cell_id"])
    return ActivityTable(
        sim_codes=sim_codes,
        times=df["timestamp"].to_numpy().astype(np.int64),
        cell_codes=cell_codes,
        sim_ids=sim_pool,
        cell_ids=cell_pool,
        tz_offset_minutes=tz_offset_minutes,
    )


def read_devices_csv(path: Union[str, Path], sim_pool: np.ndarray) -> DeviceTable:
    """Reload devices.csv against an existing sim pool; unknown sims dropped."""
    df = pl.read_csv(
        path,
        schema_overrides={
            "sim_id": pl.Utf8,
            "tac": pl.Utf8,
            "first_seen": pl.Int64,
            "last_seen": pl.Int64,
        },
    )
    sims = df["sim_id"].to_numpy().astype(str)
    pos = np.searchsorted(sim_pool, sims)
    pos = np.clip(pos, 0, max(len(sim_pool) - 1, 0))
    ok = (len(sim_pool) > 0) & (sim_pool[pos] == sims)
    return DeviceTable(
        sim_codes=pos[ok].astype(np.int32),
        tacs=df["tac"].to_numpy().astype(str)[ok],
        first_seen=df["first_seen"].to_numpy().astype(np.int64)[ok],
        last_seen=df["last_seen"].to_numpy().astype(np.int64)[ok],
    )
