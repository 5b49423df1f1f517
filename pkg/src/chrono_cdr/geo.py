"""Base-station sites, Voronoi tessellation and geodesic helpers.

Cells are merged into sites by shared base-station coordinates, the service
area of each site is estimated by a Voronoi tessellation of the site
locations clipped to a bounding box, and point-to-site queries resolve
arbitrary coordinates (estate ads, probes) to the serving site.

The tessellation is computed in a local azimuthal equirectangular projection
centered on the site cloud. At city scale (a few tens of km) the projection
error is far below cell size. The projection is affine in (lat, lon), so
straight polygon edges and point-in-polygon sidedness agree exactly between
projected space and raw coordinate space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy.spatial import Voronoi, cKDTree

EARTH_RADIUS_KM = 6371.0088

#: Slack (km) under which two candidate nearest sites count as equidistant.
TIE_EPS_KM = 1e-9


class BoundingBox(NamedTuple):
    lat_min: float
    lat_max: float
    lon_min: float
    lon_max: float

    def contains(self, lat, lon):
        lat = np.asarray(lat)
        lon = np.asarray(lon)
        return (
            (lat >= self.lat_min)
            & (lat <= self.lat_max)
            & (lon >= self.lon_min)
            & (lon <= self.lon_max)
        )


@dataclass(frozen=True)
class CellInfo:
    """One network cell: centroid and serving base-station coordinates (WGS84)."""

    cell_id: str
    centroid_lat: float
    centroid_lon: float
    station_lat: float
    station_lon: float

    def __post_init__(self):
        if not self.cell_id:
            raise ValueError("cell_id must be non-empty")
        for lat in (self.centroid_lat, self.station_lat):
            if not -90.0 <= lat <= 90.0:
                raise ValueError(f"latitude out of range: {lat}")
        for lon in (self.centroid_lon, self.station_lon):
            if not -180.0 <= lon <= 180.0:
                raise ValueError(f"longitude out of range: {lon}")


@dataclass
class SiteGeometry:
    """A merged base-station site; polygon is set by build_voronoi."""

    site_id: str
    lat: float
    lon: float
    member_cells: tuple[str, ...]
    polygon: Optional[np.ndarray] = field(default=None, repr=False)  # (k, 2) closed (lat, lon) ring


@dataclass(frozen=True)
class LocalProjection:
    """Equirectangular projection around a reference point, in km."""

    lat0: float
    lon0: float

    @property
    def _coslat(self) -> float:
        return math.cos(math.radians(self.lat0))

    def to_xy(self, lat, lon):
        lat = np.asarray(lat, dtype=float)
        lon = np.asarray(lon, dtype=float)
        x = np.radians(lon - self.lon0) * self._coslat * EARTH_RADIUS_KM
        y = np.radians(lat - self.lat0) * EARTH_RADIUS_KM
        return x, y

    def to_latlon(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        lat = self.lat0 + np.degrees(y / EARTH_RADIUS_KM)
        lon = self.lon0 + np.degrees(x / (EARTH_RADIUS_KM * self._coslat))
        return lat, lon


def distance_km(lat1, lon1, lat2, lon2):
    """Great-circle (haversine) distance in km; accepts scalars or arrays."""
    lat1, lon1, lat2, lon2 = (np.radians(np.asarray(v, dtype=float)) for v in (lat1, lon1, lat2, lon2))
    dlat = lat2 - lat1
    dlon = lon2 - lon1
    a = np.sin(dlat / 2.0) ** 2 + np.cos(lat1) * np.cos(lat2) * np.sin(dlon / 2.0) ** 2
    d = 2.0 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.clip(a, 0.0, 1.0)))
    return float(d) if d.ndim == 0 else d


def merge_cells_to_sites(cells: Sequence[CellInfo], tolerance_m: float = 0.0) -> list[SiteGeometry]:
    """Group cells by base-station location into sites.

    Two station locations are identified when their distance is within
    ``tolerance_m`` (transitively, i.e. connected components of the
    within-tolerance graph). The site id is the lexicographically smallest
    member cell_id and the site location is that member's station location,
    which makes the result independent of input order.
    """
    if not cells:
        raise ValueError("cells must be nonempty")
    ordered = sorted(cells, key=lambda c: c.cell_id)
    ids = [c.cell_id for c in ordered]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate cell_id in input")

    n = len(ordered)
    parent = list(range(n))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    def union(i: int, j: int) -> None:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)

    if tolerance_m <= 0.0:
        seen: dict[tuple[float, float], int] = {}
        for i, c in enumerate(ordered):
            key = (c.station_lat, c.station_lon)
            if key in seen:
                union(seen[key], i)
            else:
                seen[key] = i
    else:
        lats = np.array([c.station_lat for c in ordered])
        lons = np.array([c.station_lon for c in ordered])
        tol_km = tolerance_m / 1000.0
        for i in range(n):
            d = distance_km(lats[i], lons[i], lats[i + 1 :], lons[i + 1 :])
            for j in np.nonzero(np.atleast_1d(d) <= tol_km)[0]:
                union(i, i + 1 + int(j))

    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)

    sites = []
    for root in sorted(groups):
        members = groups[root]
        anchor = ordered[members[0]]  # smallest cell_id in the group
        sites.append(
            SiteGeometry(
                site_id=anchor.cell_id,
                lat=anchor.station_lat,
                lon=anchor.station_lon,
                member_cells=tuple(ordered[i].cell_id for i in members),
            )
        )
    return sites


def default_bounding_box(sites: Sequence[SiteGeometry], pad_km: float = 10.0) -> BoundingBox:
    """Sites' bounding box padded by ``pad_km`` on every side."""
    lats = np.array([s.lat for s in sites])
    lons = np.array([s.lon for s in sites])
    pad_lat = math.degrees(pad_km / EARTH_RADIUS_KM)
    coslat = math.cos(math.radians(float(lats.mean())))
    pad_lon = math.degrees(pad_km / (EARTH_RADIUS_KM * max(coslat, 1e-9)))
    return BoundingBox(
        lat_min=float(lats.min()) - pad_lat,
        lat_max=float(lats.max()) + pad_lat,
        lon_min=float(lons.min()) - pad_lon,
        lon_max=float(lons.max()) + pad_lon,
    )


def point_in_polygon(ring: np.ndarray, lat, lon):
    """Ray-casting membership test against a closed (lat, lon) ring.

    Vectorized over query points. Points exactly on an edge are ambiguous;
    callers are expected to keep probes away from boundaries.
    """
    lat = np.atleast_1d(np.asarray(lat, dtype=float))
    lon = np.atleast_1d(np.asarray(lon, dtype=float))
    inside = np.zeros(lat.shape, dtype=bool)
    # x := lon, y := lat; iterate ring edges, flip parity on crossings
    ys = ring[:, 0]
    xs = ring[:, 1]
    for k in range(len(ring) - 1):
        y1, x1 = ys[k], xs[k]
        y2, x2 = ys[k + 1], xs[k + 1]
        crosses = (y1 > lat) != (y2 > lat)
        if not np.any(crosses):
            continue
        x_at = x1 + (lat - y1) * (x2 - x1) / (y2 - y1)
        inside ^= crosses & (lon < x_at)
    return inside


class Tessellation:
    """Immutable Voronoi tessellation over site locations.

    Safe to share across threads: all point queries are read-only.
    """

    def __init__(self, sites: list[SiteGeometry], bbox: BoundingBox, projection: LocalProjection):
        self.sites = sites
        self.bbox = bbox
        self.projection = projection
        self.site_ids = np.array([s.site_id for s in sites])
        x, y = projection.to_xy([s.lat for s in sites], [s.lon for s in sites])
        self._xy = np.column_stack([x, y])
        self._tree = cKDTree(self._xy)
        self.cell_to_site = {
            cell: s.site_id for s in sites for cell in s.member_cells
        }
        self._index = {s.site_id: i for i, s in enumerate(sites)}

    def __len__(self) -> int:
        return len(self.sites)

    def site_index(self, site_id: str) -> int:
        return self._index[site_id]

    def site_codes_for(self, cell_ids: np.ndarray) -> np.ndarray:
        """Site index per cell id; -1 for cells outside the tessellation."""
        return np.array(
            [self._index.get(self.cell_to_site.get(str(c), ""), -1) for c in cell_ids],
            dtype=np.int64,
        )

    def locate(self, lat: float, lon: float) -> Optional[str]:
        """Site owning the point, or None when outside the bounding box.

        Points equidistant from several sites resolve to the smallest site_id.
        """
        if not bool(self.bbox.contains(lat, lon)):
            return None
        x, y = self.projection.to_xy(lat, lon)
        p = np.array([float(x), float(y)])
        k = min(2, len(self.sites))
        dist, idx = self._tree.query(p, k=k)
        dist, idx = np.atleast_1d(dist), np.atleast_1d(idx)
        if k == 2 and dist[1] - dist[0] <= TIE_EPS_KM:
            near = self._tree.query_ball_point(p, r=dist[0] + TIE_EPS_KM)
            return str(min(self.site_ids[i] for i in near))
        return str(self.site_ids[idx[0]])

    def locate_many(self, lat: np.ndarray, lon: np.ndarray) -> np.ndarray:
        """Vectorized locate; returns site indices, -1 for out-of-area points."""
        lat = np.asarray(lat, dtype=float)
        lon = np.asarray(lon, dtype=float)
        out = np.full(lat.shape, -1, dtype=np.int64)
        ok = self.bbox.contains(lat, lon)
        if not np.any(ok):
            return out
        x, y = self.projection.to_xy(lat[ok], lon[ok])
        pts = np.column_stack([x, y])
        k = min(2, len(self.sites))
        dist, idx = self._tree.query(pts, k=k)
        if k == 2:
            idx0 = idx[:, 0].copy()
            ties = dist[:, 1] - dist[:, 0] <= TIE_EPS_KM
            for t in np.nonzero(ties)[0]:
                near = self._tree.query_ball_point(pts[t], r=dist[t, 0] + TIE_EPS_KM)
                winner = min(near, key=lambda i: self.site_ids[i])
                idx0[t] = winner
            out[ok] = idx0
        else:
            out[ok] = np.atleast_1d(idx)
        return out

    def polygon_areas_km2(self) -> np.ndarray:
        """Shoelace area of each site polygon in projected km^2."""
        areas = np.empty(len(self.sites))
        for i, s in enumerate(self.sites):
            x, y = self.projection.to_xy(s.polygon[:-1, 0], s.polygon[:-1, 1])
            areas[i] = 0.5 * abs(np.dot(x, np.roll(y, 1)) - np.dot(y, np.roll(x, 1)))
        return areas

    def box_area_km2(self) -> float:
        x, y = self.projection.to_xy(
            [self.bbox.lat_min, self.bbox.lat_max], [self.bbox.lon_min, self.bbox.lon_max]
        )
        return float((x[1] - x[0]) * (y[1] - y[0]))

    def to_geojson(self) -> dict:
        features = []
        for s in self.sites:
            ring = [[float(lon), float(lat)] for lat, lon in s.polygon]
            features.append(
                {
                    "type": "Feature",
                    "properties": {
                        "site_id": s.site_id,
                        "member_cells": list(s.member_cells),
                        "lat": s.lat,
                        "lon": s.lon,
                    },
                    "geometry": {"type": "Polygon", "coordinates": [ring]},
                }
            )
        return {"type": "FeatureCollection", "features": features}


def build_voronoi(
    sites: list[SiteGeometry],
    bbox: Optional[BoundingBox] = None,
    pad_km: float = 10.0,
) -> Tessellation:
    """Voronoi-tessellate site locations, clipping polygons to a bounding box.

    Uses the reflection construction: sites are mirrored across all four box
    edges before the diagram is computed, which makes every original cell a
    finite polygon whose union tiles the box exactly.

    Raises ValueError when two sites are co-located or a site falls outside
    the box.
    """
    if not sites:
        raise ValueError("at least one site is required")
    if bbox is None:
        bbox = default_bounding_box(sites, pad_km=pad_km)

    lats = np.array([s.lat for s in sites])
    lons = np.array([s.lon for s in sites])
    projection = LocalProjection(lat0=float(lats.mean()), lon0=float(lons.mean()))

    x, y = projection.to_xy(lats, lons)
    pts = np.column_stack([x, y])
    xb, yb = projection.to_xy(
        [bbox.lat_min, bbox.lat_max], [bbox.lon_min, bbox.lon_max]
    )
    x_min, x_max = float(xb[0]), float(xb[1])
    y_min, y_max = float(yb[0]), float(yb[1])

    inside = (pts[:, 0] > x_min) & (pts[:, 0] < x_max) & (pts[:, 1] > y_min) & (pts[:, 1] < y_max)
    if not np.all(inside):
        bad = [sites[i].site_id for i in np.nonzero(~inside)[0]]
        raise ValueError(f"site locations outside bounding box: {bad}")

    order = np.lexsort((pts[:, 1], pts[:, 0]))
    sp = pts[order]
    close = np.hypot(np.diff(sp[:, 0]), np.diff(sp[:, 1])) <= TIE_EPS_KM
    if np.any(close):
        i = int(np.nonzero(close)[0][0])
        a, b = sites[int(order[i])].site_id, sites[int(order[i + 1])].site_id
        raise ValueError(f"duplicate site locations: {a}, {b}")

    mirrored = [pts]
    for dim, bound in ((0, x_min), (0, x_max), (1, y_min), (1, y_max)):
        m = pts.copy()
        m[:, dim] = 2.0 * bound - m[:, dim]
        mirrored.append(m)
    vor = Voronoi(np.vstack(mirrored))

    for i, site in enumerate(sites):
        region = vor.regions[vor.point_region[i]]
        if -1 in region or not region:
            raise RuntimeError(f"unbounded Voronoi cell for site {site.site_id}")
        verts = vor.vertices[region]
        center = verts.mean(axis=0)
        angles = np.arctan2(verts[:, 1] - center[1], verts[:, 0] - center[0])
        verts = verts[np.argsort(angles)]  # counter-clockwise ring
        verts[:, 0] = np.clip(verts[:, 0], x_min, x_max)
        verts[:, 1] = np.clip(verts[:, 1], y_min, y_max)
        ring = np.vstack([verts, verts[:1]])
        lat, lon = projection.to_latlon(ring[:, 0], ring[:, 1])
        site.polygon = np.column_stack([lat, lon])

    return Tessellation(sites, bbox, projection)


def read_cells_csv(path) -> list[CellInfo]:
    """Load the cells table (`cell_id,centroid_lat,centroid_lon,station_lat,station_lon`)."""
    import polars as pl

    df = pl.read_csv(path, schema_overrides={"cell_id": pl.Utf8})
    required = {"cell_id", "centroid_lat", "centroid_lon", "station_lat", "station_lon"}
    missing = required - set(df.columns)
    if missing:
        raise ValueError(f"cells csv missing columns: {sorted(missing)}")
    return [
        CellInfo(
            cell_id=row["cell_id"],
            centroid_lat=row["centroid_lat"],
            centroid_lon=row["centroid_lon"],
            station_lat=row["station_lat"],
            station_lon=row["station_lon"],
        )
        for row in df.iter_rows(named=True)
    ]
