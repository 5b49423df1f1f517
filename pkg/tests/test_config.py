"""run.json loading: defaults, key checks, synth_* routing, effective()."""

import dataclasses
import json

import pytest

from chrono_cdr.config import RunConfig, ValidationError, load_config
from chrono_cdr.synthgen import ScenarioConfig


def write(tmp_path, doc, name="run.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return p


def test_empty_config_gives_defaults(tmp_path):
    cfg = load_config(write(tmp_path, {}))
    assert cfg.run_dir == tmp_path
    assert cfg.cdr_csv == "cdr_wide.csv"
    assert cfg.tz_offset_minutes == 120
    assert cfg.smooth_window == 12
    assert cfg.half_fraction == 0.5
    assert cfg.wake_search == (180, 720)
    assert cfg.bed_search == (1020, 1620)
    assert cfg.circadian_mode == "inhabitant_based"
    assert cfg.circadian_level == "site"
    assert cfg.min_location_support == 5
    assert cfg.low_volume_factor == 0.1
    assert cfg.threads == 1
    assert cfg.scenario == ScenarioConfig()


def test_unknown_key_rejected(tmp_path):
    with pytest.raises(ValidationError, match="unknown config key 'smoothing'"):
        load_config(write(tmp_path, {"smoothing": 12}))
    with pytest.raises(ValidationError, match="synth_n_days"):
        load_config(write(tmp_path, {"synth_n_days": 10}))


def test_invalid_json_and_non_object(tmp_path):
    p = tmp_path / "run.json"
    p.write_text("{not json")
    with pytest.raises(ValidationError, match="not valid JSON"):
        load_config(p)
    with pytest.raises(ValidationError, match="JSON object"):
        load_config(write(tmp_path, [1, 2]))


def test_missing_file_raises_oserror(tmp_path):
    with pytest.raises(OSError):
        load_config(tmp_path / "absent.json")


def test_synth_keys_route_to_scenario(tmp_path):
    cfg = load_config(
        write(
            tmp_path,
            {
                "synth_seed": 9,
                "synth_days": 10,
                "synth_holidays": ["2023-01-02"],
                "synth_worker_share": 0.5,
                "synth_site_work_start_overrides": {"0": 480.0},
            },
        )
    )
    assert cfg.scenario.seed == 9
    assert cfg.scenario.days == 10
    assert cfg.scenario.holidays == ("2023-01-02",)
    assert cfg.scenario.worker_share == 0.5
    assert cfg.scenario.site_work_start_overrides == {"0": 480.0}
    # untouched scenario fields keep defaults
    assert cfg.scenario.n_sims == ScenarioConfig().n_sims


def test_synth_validation_surfaces_as_validation_error(tmp_path):
    with pytest.raises(ValidationError, match="synth_"):
        load_config(write(tmp_path, {"synth_records_per_sim_day": 0}))
    with pytest.raises(ValidationError):
        load_config(write(tmp_path, {"synth_timestamp_format": "weird"}))


def test_window_and_pair_coercion(tmp_path):
    cfg = load_config(
        write(
            tmp_path,
            {
                "wake_search": [240, 700],
                "property_bins_huf": [[100, 200], [200, 400]],
                "activity_histogram_edges": [1, 10, 100],
            },
        )
    )
    assert cfg.wake_search == (240, 700)
    assert cfg.property_bins_huf == ((100.0, 200.0), (200.0, 400.0))
    assert cfg.activity_histogram_edges == (1, 10, 100)
    with pytest.raises(ValidationError, match="start < end"):
        load_config(write(tmp_path, {"bed_search": [1620, 1020]}))
    with pytest.raises(ValidationError, match="pair"):
        load_config(write(tmp_path, {"wake_search": [1, 2, 3]}))
    with pytest.raises(ValidationError, match="lo, hi"):
        load_config(write(tmp_path, {"phone_age_bins_years": ["x"]}))


def test_range_and_enum_checks(tmp_path):
    cases = [
        ({"smooth_window": 0}, "smooth_window"),
        ({"half_fraction": 1.0}, "half_fraction"),
        ({"half_fraction": 0.0}, "half_fraction"),
        ({"n_partitions": 0}, "n_partitions"),
        ({"threads": 0}, "threads"),
        ({"circadian_mode": "psychic"}, "circadian_mode"),
        ({"circadian_level": "city"}, "circadian_level"),
        ({"dataset_month": "April"}, "dataset_month"),
    ]
    for doc, frag in cases:
        with pytest.raises(ValidationError, match=frag):
            load_config(write(tmp_path, doc))
    # valid month passes
    cfg = load_config(write(tmp_path, {"dataset_month": "2017-04"}))
    assert cfg.dataset_month == "2017-04"


def test_run_dir_resolution(tmp_path):
    sub = tmp_path / "deep"
    sub.mkdir()
    cfg = load_config(write(sub, {}))
    assert cfg.run_dir == sub
    cfg = load_config(write(sub, {"run_dir": "data"}, name="alt.json"))
    assert cfg.run_dir == sub / "data"
    cfg = load_config(write(sub, {"run_dir": str(tmp_path)}, name="abs.json"))
    assert cfg.run_dir == tmp_path


def test_path_and_artifact_resolution(tmp_path):
    cfg = load_config(write(tmp_path, {"cells_csv": "inputs/cells.csv"}))
    assert cfg.path("cells_csv") == tmp_path / "inputs/cells.csv"
    assert cfg.path("cdr_csv") == tmp_path / "cdr_wide.csv"
    assert cfg.artifact("locations.csv") == tmp_path / "locations.csv"
    abs_cfg = load_config(write(tmp_path, {"cdr_csv": "/data/x.csv"}, name="a.json"))
    assert str(abs_cfg.path("cdr_csv")) == "/data/x.csv"


def test_effective_covers_every_field(tmp_path):
    cfg = load_config(write(tmp_path, {"synth_seed": 5}))
    eff = cfg.effective()
    for f in dataclasses.fields(RunConfig):
        if f.name == "scenario":
            continue
        assert f.name in eff
    for sf in dataclasses.fields(ScenarioConfig):
        assert f"synth_{sf.name}" in eff
    assert eff["synth_seed"] == 5
    assert eff["run_dir"] == str(tmp_path)
    # everything must be JSON-serializable
    json.dumps(eff)
