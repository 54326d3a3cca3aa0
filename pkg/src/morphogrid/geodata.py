"""Geographic input parsing and the 30-arcsecond grid system.

Inputs are OSM XML or GeoJSON documents, ESRI ASCII grid rasters, and
per-cell CSV tables. The grid is anchored at (-180, 90) with a 1/120
degree pitch so cell edges line up with the WorldPop 1 km lattice.
"""
from __future__ import annotations

import csv
import io
import json
import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field

import numpy as np
from shapely.geometry import Polygon, box

from .geomath import rect_area_km2

CELL_DEG = 1.0 / 120.0  # 30 arc-seconds
GRID_ORIGIN = (-180.0, 90.0)

# OSM highway values that describe non-vehicular ways; never part of a road graph
NON_VEHICULAR = {
    "footway", "path", "cycleway", "steps", "pedestrian", "track",
    "bridleway", "corridor", "elevator", "escalator",
}


class ParseError(ValueError):
    """Malformed input document; message carries line/offset where known."""


class FormatError(ValueError):
    """Input document is neither OSM XML nor GeoJSON."""


@dataclass(frozen=True)
class GeoPoint:
    lon: float
    lat: float

    def __post_init__(self):
        if not (-180.0 <= self.lon <= 180.0 and -90.0 <= self.lat <= 90.0):
            raise ValueError(f"coordinate out of range: ({self.lon}, {self.lat})")


@dataclass
class UrbanExtract:
    """Parsed geographic content: roads, buildings, land use, named point sets."""
    roads: list = field(default_factory=list)        # (polyline [(lon,lat)...], highway tag)
    buildings: list = field(default_factory=list)    # closed rings [(lon,lat)...]
    landuse: list = field(default_factory=list)      # (closed ring, category)
    points: dict = field(default_factory=dict)       # kind -> [(lon,lat)...]
    dropped_ways: int = 0                            # ways referencing missing nodes


@dataclass(frozen=True)
class GridCell:
    col: int
    row: int

    @property
    def bbox(self):
        west = GRID_ORIGIN[0] + self.col * CELL_DEG
        north = GRID_ORIGIN[1] - self.row * CELL_DEG
        return (west, north - CELL_DEG, west + CELL_DEG, north)

    @property
    def centroid(self) -> GeoPoint:
        w, s, e, n = self.bbox
        return GeoPoint((w + e) / 2.0, (s + n) / 2.0)

    @property
    def area_km2(self) -> float:
        return rect_area_km2(*self.bbox)


@dataclass
class RasterGrid:
    origin: GeoPoint          # upper-left corner
    cell_size: float          # degrees
    ncols: int
    nrows: int
    nodata: float
    values: np.ndarray        # (nrows, ncols) float64

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(self.nrows, self.ncols)
        if self.cell_size <= 0:
            raise ValueError("cell_size must be positive")


def _close_ring(coords):
    if coords and coords[0] != coords[-1]:
        coords = coords + [coords[0]]
    return coords


def _parse_osm(text: str, bbox=None) -> UrbanExtract:
    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        raise ParseError(f"OSM XML parse failure at line {exc.position[0]}, "
                         f"column {exc.position[1]}: {exc}") from exc
    nodes = {}
    node_tags = {}
    for nd in root.iter("node"):
        nid = nd.get("id")
        nodes[nid] = (float(nd.get("lon")), float(nd.get("lat")))
        tags = {t.get("k"): t.get("v") for t in nd.findall("tag")}
        if tags:
            node_tags[nid] = tags

    out = UrbanExtract()
    for way in root.iter("way"):
        refs = [nd.get("ref") for nd in way.findall("nd")]
        if any(r not in nodes for r in refs):
            out.dropped_ways += 1
            continue
        coords = [nodes[r] for r in refs]
        tags = {t.get("k"): t.get("v") for t in way.findall("tag")}
        if "highway" in tags and len(coords) >= 2:
            out.roads.append((coords, tags["highway"]))
        elif "building" in tags and len(coords) >= 3:
            out.buildings.append(_close_ring(coords))
        elif "landuse" in tags and len(coords) >= 3:
            out.landuse.append((_close_ring(coords), tags["landuse"]))

    for nid, tags in node_tags.items():
        kind = tags.get("kind")
        if kind is None and ("amenity" in tags or "shop" in tags or "tourism" in tags):
            kind = "poi"
        if kind:
            out.points.setdefault(kind, []).append(nodes[nid])
    return _clip_extract(out, bbox)


def _geojson_rings(geom):
    """Yield exterior rings of Polygon / MultiPolygon geometry dicts."""
    t = geom.get("type")
    if t == "Polygon":
        yield [tuple(c[:2]) for c in geom["coordinates"][0]]
    elif t == "MultiPolygon":
        for poly in geom["coordinates"]:
            yield [tuple(c[:2]) for c in poly[0]]


def _parse_geojson(text: str, bbox=None) -> UrbanExtract:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"GeoJSON parse failure at line {exc.lineno}, "
                         f"column {exc.colno}: {exc.msg}") from exc
    if doc.get("type") != "FeatureCollection":
        raise FormatError("GeoJSON document must be a FeatureCollection")
    out = UrbanExtract()
    for feat in doc.get("features", []):
        geom = feat.get("geometry") or {}
        props = feat.get("properties") or {}
        gtype = geom.get("type")
        if gtype in ("LineString", "MultiLineString") and "highway" in props:
            lines = [geom["coordinates"]] if gtype == "LineString" else geom["coordinates"]
            for line in lines:
                coords = [tuple(c[:2]) for c in line]
                if len(coords) >= 2:
                    out.roads.append((coords, props["highway"]))
        elif gtype in ("Polygon", "MultiPolygon"):
            for ring in _geojson_rings(geom):
                if len(ring) < 4:
                    continue
                ring = _close_ring(list(ring))
                if "landuse" in props:
                    out.landuse.append((ring, props["landuse"]))
                else:
                    out.buildings.append(ring)
        elif gtype == "Point" and "kind" in props:
            out.points.setdefault(props["kind"], []).append(tuple(geom["coordinates"][:2]))
    return _clip_extract(out, bbox)


def _bbox_of(coords):
    xs = [c[0] for c in coords]
    ys = [c[1] for c in coords]
    return min(xs), min(ys), max(xs), max(ys)


def _intersects(b1, b2):
    return not (b1[2] < b2[0] or b2[2] < b1[0] or b1[3] < b2[1] or b2[3] < b1[1])


def _clip_extract(extract: UrbanExtract, bbox) -> UrbanExtract:
    """Retain geometries whose bounding box intersects bbox (west,south,east,north)."""
    if bbox is None:
        return extract
    extract.roads = [r for r in extract.roads if _intersects(_bbox_of(r[0]), bbox)]
    extract.buildings = [b for b in extract.buildings if _intersects(_bbox_of(b), bbox)]
    extract.landuse = [l for l in extract.landuse if _intersects(_bbox_of(l[0]), bbox)]
    extract.points = {
        k: [p for p in pts
            if bbox[0] <= p[0] <= bbox[2] and bbox[1] <= p[1] <= bbox[3]]
        for k, pts in extract.points.items()
    }
    return extract


def parse_extract(document, bbox=None) -> UrbanExtract:
    """Parse an OSM XML or GeoJSON document (auto-detected by leading token).

    `bbox` is an optional (west, south, east, north) filter. Ways that
    reference missing nodes are dropped and counted in `dropped_ways`."""
    if isinstance(document, bytes):
        document = document.decode("utf-8")
    stripped = document.lstrip()
    if stripped.startswith("<"):
        return _parse_osm(document, bbox)
    if stripped.startswith("{"):
        return _parse_geojson(document, bbox)
    raise FormatError("unrecognized document format (expected OSM XML or GeoJSON)")


def cell_containing(lon: float, lat: float) -> GridCell:
    col = math.floor((lon - GRID_ORIGIN[0]) / CELL_DEG)
    row = math.floor((GRID_ORIGIN[1] - lat) / CELL_DEG)
    return GridCell(col=col, row=row)


def make_grid(bbox) -> list[GridCell]:
    """All 30-arcsecond cells whose extent intersects (west, south, east, north).

    A bbox edge exactly on a cell boundary does not pull in the neighbor
    beyond it, so a bbox covering N aligned cells yields exactly N cells."""
    west, south, east, north = bbox
    if west > east or south > north:
        raise ValueError("inverted bbox")
    col0 = math.floor(round((west - GRID_ORIGIN[0]) / CELL_DEG, 9))
    row0 = math.floor(round((GRID_ORIGIN[1] - north) / CELL_DEG, 9))
    col1 = math.ceil(round((east - GRID_ORIGIN[0]) / CELL_DEG, 9)) - 1
    row1 = math.ceil(round((GRID_ORIGIN[1] - south) / CELL_DEG, 9)) - 1
    col1 = max(col1, col0)
    row1 = max(row1, row0)
    return [GridCell(col=c, row=r)
            for r in range(row0, row1 + 1)
            for c in range(col0, col1 + 1)]


def assign_points(points, cells) -> tuple[dict, int]:
    """Partition points among cells (west/south edges inclusive).

    Returns (mapping {(col,row): [point indices]}, dropped count)."""
    lookup = {(c.col, c.row) for c in cells}
    buckets: dict = {}
    dropped = 0
    for i, (lon, lat) in enumerate(points):
        cell = cell_containing(lon, lat)
        key = (cell.col, cell.row)
        if key in lookup:
            buckets.setdefault(key, []).append(i)
        else:
            dropped += 1
    return buckets, dropped


def zonal_mean(raster: RasterGrid, cell: GridCell):
    """Area-weighted mean of raster pixels overlapping the cell, skipping
    nodata. Returns None when the overlap is empty or fully nodata."""
    west, south, east, north = cell.bbox
    cs = raster.cell_size
    rx0 = raster.origin.lon
    ry0 = raster.origin.lat  # top edge
    j0 = max(0, math.floor((west - rx0) / cs))
    j1 = min(raster.ncols - 1, math.ceil((east - rx0) / cs) - 1)
    i0 = max(0, math.floor((ry0 - north) / cs))
    i1 = min(raster.nrows - 1, math.ceil((ry0 - south) / cs) - 1)
    if j1 < j0 or i1 < i0:
        return None
    total_w = 0.0
    total = 0.0
    for i in range(i0, i1 + 1):
        ptop = ry0 - i * cs
        oy = min(north, ptop) - max(south, ptop - cs)
        if oy <= 0:
            continue
        for j in range(j0, j1 + 1):
            pleft = rx0 + j * cs
            ox = min(east, pleft + cs) - max(west, pleft)
            if ox <= 0:
                continue
            v = raster.values[i, j]
            if v == raster.nodata or not np.isfinite(v):
                continue
            w = ox * oy
            total += w * v
            total_w += w
    if total_w == 0.0:
        return None
    return total / total_w


def filter_built(cells, buildings) -> list[GridCell]:
    """Cells intersected by at least one building footprint."""
    polys = [Polygon(b) for b in buildings if len(b) >= 4]
    kept = []
    for cell in cells:
        cb = box(*(cell.bbox[i] for i in (0, 1, 2, 3)))
        if any(cb.intersects(p) for p in polys):
            kept.append(cell)
    return kept


def read_asc(text: str) -> RasterGrid:
    """Parse an ESRI ASCII grid document."""
    header = {}
    lines = text.splitlines()
    idx = 0
    while idx < len(lines):
        parts = lines[idx].split()
        if len(parts) == 2 and parts[0].lower() in (
                "ncols", "nrows", "xllcorner", "yllcorner", "xllcenter",
                "yllcenter", "cellsize", "nodata_value"):
            header[parts[0].lower()] = float(parts[1])
            idx += 1
        else:
            break
    for key in ("ncols", "nrows", "cellsize"):
        if key not in header:
            raise ParseError(f"ESRI ASCII grid header missing '{key}' (line {idx + 1})")
    ncols = int(header["ncols"])
    nrows = int(header["nrows"])
    cs = header["cellsize"]
    if "xllcorner" in header:
        xll, yll = header["xllcorner"], header["yllcorner"]
    else:
        xll = header["xllcenter"] - cs / 2.0
        yll = header["yllcenter"] - cs / 2.0
    nodata = header.get("nodata_value", -9999.0)
    data = np.array(" ".join(lines[idx:]).split(), dtype=float)
    if data.size != ncols * nrows:
        raise ParseError(f"ESRI ASCII grid has {data.size} values, expected {ncols * nrows}")
    return RasterGrid(origin=GeoPoint(xll, yll + nrows * cs), cell_size=cs,
                      ncols=ncols, nrows=nrows, nodata=nodata, values=data)


def serialize_extract(extract: UrbanExtract) -> str:
    """Canonical GeoJSON serialization; parse_extract of the output yields
    an equal extract (modulo the dropped-way counter)."""
    features = []
    for coords, tag in extract.roads:
        features.append({"type": "Feature",
                         "geometry": {"type": "LineString",
                                      "coordinates": [list(c) for c in coords]},
                         "properties": {"highway": tag}})
    for ring in extract.buildings:
        features.append({"type": "Feature",
                         "geometry": {"type": "Polygon",
                                      "coordinates": [[list(c) for c in ring]]},
                         "properties": {}})
    for ring, category in extract.landuse:
        features.append({"type": "Feature",
                         "geometry": {"type": "Polygon",
                                      "coordinates": [[list(c) for c in ring]]},
                         "properties": {"landuse": category}})
    for kind in sorted(extract.points):
        for lon, lat in extract.points[kind]:
            features.append({"type": "Feature",
                             "geometry": {"type": "Point",
                                          "coordinates": [lon, lat]},
                             "properties": {"kind": kind}})
    return json.dumps({"type": "FeatureCollection", "features": features},
                      sort_keys=True)


def read_cell_csv(text: str) -> dict:
    """Read a `cell_col,cell_row,value` table into {(col,row): value}."""
    reader = csv.DictReader(io.StringIO(text))
    required = {"cell_col", "cell_row", "value"}
    if reader.fieldnames is None or not required.issubset(reader.fieldnames):
        raise FormatError("cell CSV must have header cell_col,cell_row,value")
    out = {}
    for rec in reader:
        out[(int(rec["cell_col"]), int(rec["cell_row"]))] = float(rec["value"])
    return out
