"""Session fixtures: one small generated scenario shared by the test modules."""

from __future__ import annotations

import pytest

from chrono_cdr import geo, ingest, locations, synthgen

SMALL = synthgen.ScenarioConfig(
    seed=4242,
    n_sims=3000,
    n_sites=10,
    n_low_volume_sites=2,
    days=14,
    start_date="2023-06-01",
    holidays=("2023-06-05",),  # one Monday public holiday on top of weekends
    records_per_sim_day=30.0,
)


@pytest.fixture(scope="session")
def small_paths(tmp_path_factory):
    out = tmp_path_factory.mktemp("small-scn")
    return synthgen.generate(SMALL, out)


@pytest.fixture(scope="session")
def small_truth(small_paths):
    return synthgen.GroundTruth.from_json(small_paths["ground_truth"])


@pytest.fixture(scope="session")
def small_loaded(small_paths):
    return ingest.load_cdr_csv(
        small_paths["cdr"], tz_offset_minutes=SMALL.tz_offset_minutes
    )


@pytest.fixture(scope="session")
def small_activity(small_loaded):
    return small_loaded[0].activity


@pytest.fixture(scope="session")
def small_cal(small_paths):
    return locations.Calendar.from_json(small_paths["calendar"])


@pytest.fixture(scope="session")
def small_cells(small_paths):
    return geo.read_cells_csv(small_paths["cells"])


@pytest.fixture(scope="session")
def small_tess(small_cells):
    return geo.build_voronoi(geo.merge_cells_to_sites(small_cells))


@pytest.fixture(scope="session")
def small_loc(small_activity, small_cal):
    return locations.infer_locations(small_activity, small_cal)
