"""Ingest: stream parser, bulk loader, and their agreement on the same file."""

import io
import json

import numpy as np
import pytest

from chrono_cdr import ingest, synthgen

HEADER = "sim_id,timestamp,cell_id,customer_type,subscription_type,age,gender,tac\n"


def stream(text, **kw):
    report = ingest.ParseReport()
    recs = list(ingest.parse_cdr_stream(io.StringIO(text), report=report, **kw))
    return recs, report


@pytest.fixture(scope="module")
def micro_paths(tmp_path_factory):
    cfg = synthgen.ScenarioConfig(
        seed=99,
        n_sims=300,
        n_sites=6,
        n_low_volume_sites=1,
        days=7,
        start_date="2023-06-01",
        records_per_sim_day=8.0,
        n_malformed=40,
    )
    out = tmp_path_factory.mktemp("micro-scn")
    return synthgen.generate(cfg, out)


def test_missing_required_column():
    with pytest.raises(ingest.SchemaError):
        stream("sim_id,timestamp\nx,12345\n")


def test_empty_input():
    with pytest.raises(ingest.SchemaError):
        stream("")


def test_schema_remap():
    text = "subscriber,when,antenna\ns1,1491004800,c1\n"
    recs, report = stream(
        text, schema={"sim_id": "subscriber", "timestamp": "when", "cell_id": "antenna"}
    )
    assert len(recs) == 1
    assert recs[0].sim_id == "s1"
    assert recs[0].cell_id == "c1"
    assert report.records == 1


def test_malformed_reasons_counted():
    text = HEADER + (
        ",1491004800,c1,,,,,\n"          # empty sim
        "s1,1491004800,,,,,,\n"          # empty cell
        "s1,not-a-time,c1,,,,,\n"        # bad timestamp
        "s1,,c1,,,,,\n"                  # missing timestamp
        "s1,1491004805,c1,,,,,\n"        # fine
    )
    recs, report = stream(text)
    assert len(recs) == 1
    assert report.lines == 5
    assert report.records == 1
    assert report.malformed == 4
    assert report.malformed_reasons == {
        "empty_sim_id": 1,
        "empty_cell_id": 1,
        "bad_timestamp": 2,
    }
    assert report.lines == report.records + report.malformed


def test_timestamp_truncated_to_tick():
    recs, _ = stream(HEADER + "s1,1491004807,c1,,,,,\n")
    assert recs[0].timestamp == 1491004800


def test_attribute_normalization():
    text = HEADER + "s1,1491004800,c1, Consumer ,PREPAID,35,f,35123456\n"
    recs, _ = stream(text)
    r = recs[0]
    assert r.customer_type == "consumer"
    assert r.subscription_type == "prepaid"
    assert r.age == 35
    assert r.gender == "F"
    assert r.tac == "35123456"


def test_attribute_fallbacks():
    text = HEADER + "s1,1491004800,c1,weird,alien,999,,\n"
    recs, _ = stream(text)
    r = recs[0]
    assert r.customer_type == "unknown"
    assert r.subscription_type == "unknown"
    assert r.age is None
    assert r.gender == "unknown"
    assert r.tac is None


def test_stream_accepts_offset_iso_bulk_does_not(tmp_path):
    # the bulk route is restricted to epoch / naive ISO; timestamps that
    # carry their own offset only pass through the streaming parser
    text = HEADER + "s1,2017-04-01T05:00:00+03:00,c1,,,,,\n"
    recs, report = stream(text)
    assert report.records == 1
    assert recs[0].timestamp == 1491004800 + 7200  # 02:00 UTC that day

    p = tmp_path / "offset.csv"
    p.write_text(text)
    _, bulk_report = ingest.load_cdr_csv(p)
    assert bulk_report.malformed_reasons.get("bad_timestamp") == 1


def test_device_intervals_from_tac_runs():
    rows = [
        ("a", 100, "c1", "11111111"),
        ("a", 200, "c1", "11111111"),
        ("a", 300, "c1", None),          # no TAC: invisible to runs
        ("a", 400, "c1", "22222222"),
        ("a", 500, "c1", "11111111"),    # back to the first phone: new run
        ("b", 100, "c2", "33333333"),
    ]
    recs = [
        ingest.CdrRecord(sim_id=s, timestamp=t, cell_id=c, tac=tac)
        for s, t, c, tac in rows
    ]
    tables = ingest.normalize_tables(recs)
    dev = tables.devices
    got = [
        (str(tables.activity.sim_ids[dev.sim_codes[i]]), str(dev.tacs[i]),
         int(dev.first_seen[i]), int(dev.last_seen[i]))
        for i in range(len(dev))
    ]
    assert got == [
        ("a", "11111111", 100, 200),
        ("a", "22222222", 400, 400),
        ("a", "11111111", 500, 500),
        ("b", "33333333", 100, 100),
    ]


def test_subscriber_first_known_wins_and_conflicts():
    recs = [
        ingest.CdrRecord("a", 100, "c1"),                                  # all unknown
        ingest.CdrRecord("a", 200, "c1", customer_type="consumer", age=40),
        ingest.CdrRecord("a", 300, "c1", customer_type="business", age=40),  # conflict
        ingest.CdrRecord("b", 100, "c1", customer_type="business"),
    ]
    tables = ingest.normalize_tables(recs)
    subs = tables.subscribers
    i_a = list(subs.sim_ids).index("a")
    i_b = list(subs.sim_ids).index("b")
    assert subs.customer_type[i_a] == "consumer"
    assert subs.customer_type[i_b] == "business"
    assert subs.age[i_a] == 40
    assert subs.age[i_b] == -1
    assert tables.conflicts["customer_type"] == 1
    assert tables.conflicts["age"] == 0


def assert_tables_equal(a: ingest.NormalizedTables, b: ingest.NormalizedTables):
    assert np.array_equal(a.activity.sim_codes, b.activity.sim_codes)
    assert np.array_equal(a.activity.times, b.activity.times)
    assert np.array_equal(a.activity.cell_codes, b.activity.cell_codes)
    assert np.array_equal(a.activity.sim_ids, b.activity.sim_ids)
    assert np.array_equal(a.activity.cell_ids, b.activity.cell_ids)
    assert np.array_equal(a.subscribers.customer_type, b.subscribers.customer_type)
    assert np.array_equal(a.subscribers.subscription_type, b.subscribers.subscription_type)
    assert np.array_equal(a.subscribers.age, b.subscribers.age)
    assert np.array_equal(a.subscribers.gender, b.subscribers.gender)
    assert np.array_equal(a.devices.sim_codes, b.devices.sim_codes)
    assert np.array_equal(a.devices.tacs, b.devices.tacs)
    assert np.array_equal(a.devices.first_seen, b.devices.first_seen)
    assert np.array_equal(a.devices.last_seen, b.devices.last_seen)
    assert a.conflicts == b.conflicts


def test_bulk_loader_matches_streaming_parser(micro_paths):
    bulk, bulk_report = ingest.load_cdr_csv(micro_paths["cdr"])
    report = ingest.ParseReport()
    streamed = ingest.normalize_tables(
        ingest.parse_cdr_stream(micro_paths["cdr"], report=report)
    )
    assert bulk_report.lines == report.lines
    assert bulk_report.records == report.records
    assert bulk_report.malformed == report.malformed
    assert bulk_report.malformed_reasons == report.malformed_reasons
    assert_tables_equal(bulk, streamed)


def test_partitioned_normalize_identical(micro_paths):
    one, _ = ingest.load_cdr_csv(micro_paths["cdr"], n_partitions=1)
    four, _ = ingest.load_cdr_csv(micro_paths["cdr"], n_partitions=4)
    assert_tables_equal(one, four)


def test_filter_sims():
    recs = []
    # sim "hi": 30 records over 3 days; "mid": 10 over 1 day; "lo": 2 over 1 day
    for d in range(3):
        for k in range(10):
            recs.append(ingest.CdrRecord("hi", d * 86_400 + k * 600, "c1"))
    for k in range(10):
        recs.append(ingest.CdrRecord("mid", k * 600, "c1"))
    recs.append(ingest.CdrRecord("lo", 0, "c1"))
    recs.append(ingest.CdrRecord("lo", 600, "c1"))
    tables = ingest.normalize_tables(recs, tz_offset_minutes=0)

    kept, rep = ingest.filter_sims(tables, min_records=5, min_active_days=2)
    kept_ids = {str(tables.activity.sim_ids[c]) for c in np.unique(kept.activity.sim_codes)}
    assert kept_ids == {"hi"}
    assert rep.excluded_low_records == 1          # "lo" fails the record floor
    assert rep.excluded_low_active_days == 1      # "mid" fails only the day floor
    assert rep.kept_records == 30
    assert rep.dropped_records == 12


def test_activity_histograms():
    recs = []
    for k in range(3):
        recs.append(ingest.CdrRecord("a", k * 600, "c1"))
    recs.append(ingest.CdrRecord("b", 0, "c1"))
    tables = ingest.normalize_tables(recs, tz_offset_minutes=0)
    act_h, days_h = ingest.activity_histograms(tables.activity, bucket_edges=(1, 2, 5))
    assert sum(act_h.sim_counts) == 2
    assert sum(days_h.sim_counts) == 2
    assert len(act_h.labels()) == 4  # three edges -> four buckets
    # shares sum to 1 over non-empty data
    assert abs(sum(act_h.activity_share) - 1.0) < 1e-12


def test_write_artifacts_round_trip(micro_paths, tmp_path):
    tables, report = ingest.load_cdr_csv(micro_paths["cdr"])
    paths = ingest.write_artifacts(tables, report, tmp_path)

    act2 = ingest.read_activity_csv(paths["activity"], tz_offset_minutes=120)
    assert np.array_equal(act2.times, tables.activity.times)
    assert np.array_equal(
        act2.sim_ids[act2.sim_codes], tables.activity.sim_ids[tables.activity.sim_codes]
    )
    assert np.array_equal(
        act2.cell_ids[act2.cell_codes],
        tables.activity.cell_ids[tables.activity.cell_codes],
    )

    dev2 = ingest.read_devices_csv(paths["devices"], act2.sim_ids)
    assert len(dev2) == len(tables.devices)
    assert np.array_equal(dev2.first_seen, tables.devices.first_seen)

    blob = json.loads((tmp_path / "ingest_report.json").read_text())
    assert blob["lines"] == report.lines
    assert blob["records"] == report.records
    assert blob["malformed"] == report.malformed
    assert blob["n_sims"] == tables.activity.n_sims
    assert "activity_histogram" in blob
