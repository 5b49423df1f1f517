"""Run configuration: one flat JSON namespace covering every tunable default.

A run directory holds the inputs and receives every artifact. The config
file is a flat JSON object; unknown keys are rejected so typos cannot
silently fall back to defaults. ``synth_``-prefixed keys configure the
scenario generator and map one-to-one onto ScenarioConfig fields.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

from . import timebase
from .synthgen import ScenarioConfig


class ValidationError(ValueError):
    """Bad config or bad input data; maps to exit code 2."""


@dataclass
class RunConfig:
    run_dir: Path = Path(".")

    # input files, resolved against run_dir when relative
    cdr_csv: str = "cdr_wide.csv"
    cells_csv: str = "cells.csv"
    calendar_json: str = "calendar.json"
    estate_ads_csv: str = "estate_ads.csv"
    device_catalog_csv: str = "device_catalog.csv"

    # ingest
    schema: Optional[dict] = None          # column name remap, None = built-in wide layout
    tz_offset_minutes: int = timebase.DEFAULT_TZ_OFFSET_MINUTES
    n_partitions: int = 1
    min_records: int = 0
    min_active_days: int = 0
    activity_histogram_edges: tuple = (1, 2, 5, 10, 20, 50, 100, 200, 500, 1000)

    # location inference / downstream support floor
    min_location_support: int = 5

    # circadian detection
    smooth_window: int = 12
    half_fraction: float = 0.5
    wake_search: tuple = (180, 720)
    bed_search: tuple = (1020, 1620)
    noise_floor_min_counts: float = 5.0
    noise_floor_peak_fraction: float = 0.05
    circadian_mode: str = "inhabitant_based"
    circadian_level: str = "site"

    # working hours
    work_start_search: tuple = (240, 840)
    work_end_search: tuple = (840, 1440)
    low_volume_factor: float = 0.1
    pairing_k: int = 5

    # ses joins
    dataset_month: str = ""                # "" = month of the calendar start date
    property_bins_huf: tuple = ((300_000, 500_000), (500_000, 700_000), (700_000, 900_000), (900_000, 1_300_000))
    phone_price_bins_eur: tuple = ((0, 150), (150, 300), (300, 450), (450, 600), (600, 750))
    phone_age_bins_years: tuple = ((0, 1), (1, 2), (2, 3), (3, 4), (4, 5))

    # parallelism default; the --threads flag wins
    threads: int = 1

    # generator scenario, collected from synth_* keys
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)

    def path(self, name: str) -> Path:
        """Resolve a configured input path against the run directory."""
        p = Path(getattr(self, name))
        return p if p.is_absolute() else self.run_dir / p

    def artifact(self, filename: str) -> Path:
        return self.run_dir / filename

    def effective(self) -> dict:
        """Flat dict of every effective setting, for the report stage."""
        out = {}
        for f in dataclasses.fields(self):
            if f.name == "scenario":
                for sf in dataclasses.fields(ScenarioConfig):
                    out[f"synth_{sf.name}"] = _plain(getattr(self.scenario, sf.name))
            elif f.name == "run_dir":
                out["run_dir"] = str(self.run_dir)
            else:
                out[f.name] = _plain(getattr(self, f.name))
        return out


def _plain(v):
    if isinstance(v, tuple):
        return [_plain(x) for x in v]
    if isinstance(v, (list, dict, str, int, float, bool)) or v is None:
        return v
    if dataclasses.is_dataclass(v):
        return dataclasses.asdict(v)
    return str(v)


def _as_tuple_pairs(value, key: str) -> tuple:
    try:
        return tuple((float(lo), float(hi)) for lo, hi in value)
    except (TypeError, ValueError) as e:
        raise ValidationError(f"config key {key!r} must be a list of [lo, hi] pairs") from e


def _as_window(value, key: str) -> tuple:
    if not (isinstance(value, (list, tuple)) and len(value) == 2):
        raise ValidationError(f"config key {key!r} must be a [start_min, end_min] pair")
    lo, hi = int(value[0]), int(value[1])
    if lo >= hi:
        raise ValidationError(f"config key {key!r} must satisfy start < end")
    return lo, hi


_PAIR_KEYS = {"property_bins_huf", "phone_price_bins_eur", "phone_age_bins_years"}
_WINDOW_KEYS = {"wake_search", "bed_search", "work_start_search", "work_end_search"}
_INT_KEYS = {
    "tz_offset_minutes", "n_partitions", "min_records", "min_active_days",
    "min_location_support", "smooth_window", "pairing_k", "threads",
}
_FLOAT_KEYS = {
    "half_fraction", "noise_floor_min_counts", "noise_floor_peak_fraction",
    "low_volume_factor",
}


def load_config(path: Union[str, Path]) -> RunConfig:
    """Load run.json; reject unknown keys; validate ranges."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except OSError:
        raise
    except json.JSONDecodeError as e:
        raise ValidationError(f"config {path} is not valid JSON: {e}") from e
    if not isinstance(raw, dict):
        raise ValidationError(f"config {path} must be a JSON object")

    cfg = RunConfig()
    cfg.run_dir = Path(raw.pop("run_dir", path.parent))
    if not cfg.run_dir.is_absolute():
        cfg.run_dir = path.parent / cfg.run_dir

    synth_kwargs = {}
    scenario_fields = {f.name: f for f in dataclasses.fields(ScenarioConfig)}
    known = {f.name for f in dataclasses.fields(RunConfig)} - {"run_dir", "scenario"}
    for key, value in raw.items():
        if key.startswith("synth_"):
            name = key[len("synth_"):]
            if name not in scenario_fields:
                raise ValidationError(f"unknown config key {key!r}")
            synth_kwargs[name] = value
            continue
        if key not in known:
            raise ValidationError(f"unknown config key {key!r}")
        if key in _PAIR_KEYS:
            value = _as_tuple_pairs(value, key)
        elif key in _WINDOW_KEYS:
            value = _as_window(value, key)
        elif key in _INT_KEYS:
            value = int(value)
        elif key in _FLOAT_KEYS:
            value = float(value)
        elif key == "activity_histogram_edges":
            value = tuple(int(v) for v in value)
        setattr(cfg, key, value)

    try:
        cfg.scenario = _scenario_from(synth_kwargs)
        cfg.scenario.validate()
    except ValidationError:
        raise
    except (TypeError, ValueError) as e:
        raise ValidationError(f"bad synth_* configuration: {e}") from e

    if cfg.smooth_window < 1:
        raise ValidationError("smooth_window must be >= 1")
    if not 0.0 < cfg.half_fraction < 1.0:
        raise ValidationError("half_fraction must be in (0, 1)")
    if cfg.n_partitions < 1:
        raise ValidationError("n_partitions must be >= 1")
    if cfg.threads < 1:
        raise ValidationError("threads must be >= 1")
    if cfg.circadian_mode not in ("cell_based", "inhabitant_based", "worker_based"):
        raise ValidationError(f"unknown circadian_mode {cfg.circadian_mode!r}")
    if cfg.circadian_level not in ("cell", "site", "all"):
        raise ValidationError(f"unknown circadian_level {cfg.circadian_level!r}")
    if cfg.dataset_month and len(cfg.dataset_month.split("-")) != 2:
        raise ValidationError("dataset_month must look like YYYY-MM")
    return cfg


def _scenario_from(kwargs: dict) -> ScenarioConfig:
    if "holidays" in kwargs:
        kwargs["holidays"] = tuple(kwargs["holidays"])
    if "site_work_start_overrides" in kwargs:
        kwargs["site_work_start_overrides"] = dict(kwargs["site_work_start_overrides"])
    if "chronotype_groups" in kwargs and kwargs["chronotype_groups"] is not None:
        from .synthgen import ChronotypeGroup

        kwargs["chronotype_groups"] = tuple(
            ChronotypeGroup(**g) for g in kwargs["chronotype_groups"]
        )
    return ScenarioConfig(**kwargs)
