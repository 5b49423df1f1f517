"""Tessellation: site merging, Voronoi membership, areas, projections."""

import json
import math

import numpy as np
import pytest

import oracles
from chrono_cdr import geo


def random_sites(rng, n):
    lat = 47.0 + rng.uniform(0, 0.5, n)
    lon = 19.0 + rng.uniform(0, 0.7, n)
    return [
        geo.SiteGeometry(site_id=f"s{i:03d}", lat=float(lat[i]), lon=float(lon[i]), member_cells=(f"s{i:03d}x",))
        for i in range(n)
    ]


def test_local_projection_round_trip():
    proj = geo.LocalProjection(47.5, 19.0)
    rng = np.random.default_rng(1)
    lat = 47.5 + rng.uniform(-0.3, 0.3, 200)
    lon = 19.0 + rng.uniform(-0.3, 0.3, 200)
    x, y = proj.to_xy(lat, lon)
    lat2, lon2 = proj.to_latlon(x, y)
    assert np.allclose(lat, lat2, atol=1e-12)
    assert np.allclose(lon, lon2, atol=1e-12)


def test_distance_km_known_value():
    # one degree of latitude is ~111.19 km on the sphere used here
    d = geo.distance_km(47.0, 19.0, 48.0, 19.0)
    assert abs(d - 111.19) < 0.2


def test_merge_cells_exact_coincidence():
    cells = [
        geo.CellInfo("a1", 47.01, 19.01, 47.0, 19.0),
        geo.CellInfo("a2", 47.02, 19.00, 47.0, 19.0),
        geo.CellInfo("b1", 47.11, 19.11, 47.1, 19.1),
    ]
    sites = geo.merge_cells_to_sites(cells)
    assert len(sites) == 2
    by_members = {s.member_cells: s for s in sites}
    assert ("a1", "a2") in by_members
    assert ("b1",) in by_members
    # the site inherits the shared station coordinates
    assert by_members[("a1", "a2")].lat == 47.0


def test_merge_cells_tolerance():
    # stations 50 m apart merge at 100 m tolerance, stay apart at 10 m
    cells = [
        geo.CellInfo("a", 47.0, 19.0, 47.0, 19.0),
        geo.CellInfo("b", 47.0005, 19.0, 47.00045, 19.0),  # ~50 m north
    ]
    assert len(geo.merge_cells_to_sites(cells, tolerance_m=100.0)) == 1
    assert len(geo.merge_cells_to_sites(cells, tolerance_m=10.0)) == 2


def test_voronoi_membership_matches_linear_scan():
    rng = np.random.default_rng(7)
    sites = random_sites(rng, 40)
    tess = geo.build_voronoi(sites)
    xs, ys = tess.projection.to_xy(
        np.array([s.lat for s in sites]), np.array([s.lon for s in sites])
    )
    site_xy = np.column_stack([xs, ys])

    lat = rng.uniform(tess.bbox.lat_min, tess.bbox.lat_max, 2000)
    lon = rng.uniform(tess.bbox.lon_min, tess.bbox.lon_max, 2000)
    got = tess.locate_many(lat, lon)
    px, py = tess.projection.to_xy(lat, lon)
    for i in range(len(lat)):
        want, margin = oracles.nearest_site_scan(px[i], py[i], site_xy)
        if margin < 1e-9:
            continue
        assert got[i] == want


def test_locate_scalar_agrees_with_vector():
    rng = np.random.default_rng(8)
    sites = random_sites(rng, 15)
    tess = geo.build_voronoi(sites)
    lat = rng.uniform(tess.bbox.lat_min, tess.bbox.lat_max, 50)
    lon = rng.uniform(tess.bbox.lon_min, tess.bbox.lon_max, 50)
    vec = tess.locate_many(lat, lon)
    for i in range(50):
        one = tess.locate(float(lat[i]), float(lon[i]))
        assert one == str(tess.site_ids[vec[i]])


def test_locate_outside_box_is_none():
    rng = np.random.default_rng(9)
    sites = random_sites(rng, 10)
    tess = geo.build_voronoi(sites)
    assert tess.locate(0.0, 0.0) is None
    assert tess.locate_many(np.array([0.0]), np.array([0.0]))[0] == -1


def test_polygon_areas_tile_the_box():
    rng = np.random.default_rng(10)
    sites = random_sites(rng, 30)
    tess = geo.build_voronoi(sites)
    areas = tess.polygon_areas_km2()
    assert (areas > 0).all()
    assert abs(areas.sum() - tess.box_area_km2()) / tess.box_area_km2() < 1e-6


def test_point_in_polygon_agrees_with_membership():
    rng = np.random.default_rng(11)
    sites = random_sites(rng, 20)
    tess = geo.build_voronoi(sites)
    lat = rng.uniform(tess.bbox.lat_min, tess.bbox.lat_max, 300)
    lon = rng.uniform(tess.bbox.lon_min, tess.bbox.lon_max, 300)
    codes = tess.locate_many(lat, lon)
    for i in range(len(lat)):
        inside = [
            s.site_id
            for s in tess.sites
            if s.polygon is not None and geo.point_in_polygon(s.polygon, lat[i], lon[i])
        ]
        # boundary points may fall in 0 or 2 polygons; interior in exactly 1
        if len(inside) == 1:
            assert inside[0] == str(tess.site_ids[codes[i]])


def test_site_codes_for():
    cells = [
        geo.CellInfo("a1", 47.01, 19.01, 47.0, 19.0),
        geo.CellInfo("b1", 47.11, 19.11, 47.1, 19.1),
    ]
    tess = geo.build_voronoi(geo.merge_cells_to_sites(cells))
    codes = tess.site_codes_for(np.array(["a1", "b1", "zz"]))
    assert codes[2] == -1
    assert str(tess.site_ids[codes[0]]) != str(tess.site_ids[codes[1]])


def test_geojson_schema(small_tess):
    doc = small_tess.to_geojson()
    assert doc["type"] == "FeatureCollection"
    assert len(doc["features"]) == len(small_tess)
    f = doc["features"][0]
    assert f["geometry"]["type"] == "Polygon"
    ring = f["geometry"]["coordinates"][0]
    assert ring[0] == ring[-1]
    assert set(f["properties"]) >= {"site_id", "member_cells", "lat", "lon"}
    json.dumps(doc)  # must be serializable as-is


def test_build_voronoi_rejects_empty_and_duplicates():
    with pytest.raises(ValueError):
        geo.build_voronoi([])
    s = random_sites(np.random.default_rng(0), 2)
    dup = [s[0], geo.SiteGeometry("dup", s[0].lat, s[0].lon, ("d",))]
    with pytest.raises(ValueError):
        geo.build_voronoi(dup)


def test_single_site_owns_the_whole_box():
    tess = geo.build_voronoi(random_sites(np.random.default_rng(3), 1))
    assert abs(tess.polygon_areas_km2().sum() - tess.box_area_km2()) < 1e-6
    mid_lat = (tess.bbox.lat_min + tess.bbox.lat_max) / 2
    mid_lon = (tess.bbox.lon_min + tess.bbox.lon_max) / 2
    assert tess.locate(mid_lat, mid_lon) == "s000"


def test_read_cells_csv(tmp_path):
    p = tmp_path / "cells.csv"
    p.write_text(
        "cell_id,centroid_lat,centroid_lon,station_lat,station_lon\n"
        "x1,47.01,19.01,47.0,19.0\n"
    )
    cells = geo.read_cells_csv(p)
    assert len(cells) == 1
    assert cells[0].cell_id == "x1"
    assert cells[0].station_lat == 47.0
