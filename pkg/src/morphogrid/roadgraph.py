"""Tiered road-network graph: construction, intersections, lengths,
bearings, and blocks (bounded planar faces).

Ways are split into edges at shared vertices; crossings without a shared
vertex are left unconnected (bridge/tunnel semantics). Block extraction
works on the planar subdivision of the clipped linework instead, so
overpasses do enclose faces there.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np
from shapely.geometry import LineString, box
from shapely.ops import polygonize, unary_union

from .geodata import NON_VEHICULAR, GridCell
from .geomath import (bearing_deg, clip_segment, haversine_m,
                      polygon_area_m2, polyline_length_m)


class RoadTier(IntEnum):
    """Condensed five-tier road hierarchy; higher value = higher tier."""
    MINOR = 1
    TERTIARY = 2
    SECONDARY = 3
    PRIMARY = 4
    MOTORWAY = 5

    def __str__(self):
        return self.name.lower()


_TIER_MAP = {
    "motorway": RoadTier.MOTORWAY, "motorway_link": RoadTier.MOTORWAY,
    "trunk": RoadTier.MOTORWAY, "trunk_link": RoadTier.MOTORWAY,
    "primary": RoadTier.PRIMARY, "primary_link": RoadTier.PRIMARY,
    "secondary": RoadTier.SECONDARY, "secondary_link": RoadTier.SECONDARY,
    "tertiary": RoadTier.TERTIARY, "tertiary_link": RoadTier.TERTIARY,
}


def regroup_highway(tag: str):
    """Map an OSM highway value to a RoadTier, or None for non-vehicular ways.

    Unknown vehicular-looking tags fall through to MINOR."""
    if tag in _TIER_MAP:
        return _TIER_MAP[tag]
    if tag in NON_VEHICULAR:
        return None
    return RoadTier.MINOR


@dataclass
class Edge:
    u: int
    v: int
    tier: RoadTier
    length_m: float
    polyline: list  # [(lon, lat), ...]


@dataclass
class RoadGraph:
    nodes: dict = field(default_factory=dict)   # id -> (lon, lat)
    edges: list = field(default_factory=list)   # list[Edge]

    def degree(self, node_id: int) -> int:
        d = 0
        for e in self.edges:
            if e.u == node_id:
                d += 1
            if e.v == node_id:
                d += 1
        return d

    def degrees(self) -> dict:
        d = {nid: 0 for nid in self.nodes}
        for e in self.edges:
            d[e.u] += 1
            d[e.v] += 1
        return d


_QUANT = 1e7  # 1e-7 degree node-merge tolerance


def _qkey(lon: float, lat: float):
    return (round(lon * _QUANT), round(lat * _QUANT))


def build_graph(roads) -> RoadGraph:
    """Build the graph from raw (polyline, highway tag) ways.

    Vertices shared between ways (or repeated within one way) become graph
    nodes, as do all way endpoints; polylines are split into edges at
    those nodes."""
    tiered = []
    for coords, tag in roads:
        tier = regroup_highway(tag)
        if tier is not None and len(coords) >= 2:
            tiered.append((coords, tier))

    counts: dict = {}
    for coords, _ in tiered:
        for i, (lon, lat) in enumerate(coords):
            k = _qkey(lon, lat)
            # endpoints always count twice so they always become nodes
            counts[k] = counts.get(k, 0) + (2 if i in (0, len(coords) - 1) else 1)

    graph = RoadGraph()
    ids: dict = {}

    def node_id(lon, lat):
        k = _qkey(lon, lat)
        if k not in ids:
            ids[k] = len(ids)
            graph.nodes[ids[k]] = (lon, lat)
        return ids[k]

    seen = set()
    for coords, tier in tiered:
        breaks = [i for i, (lon, lat) in enumerate(coords)
                  if counts[_qkey(lon, lat)] >= 2]
        for a, b in zip(breaks[:-1], breaks[1:]):
            part = coords[a:b + 1]
            u = node_id(*part[0])
            v = node_id(*part[-1])
            key = (min(u, v), max(u, v), tier,
                   tuple(_qkey(*p) for p in (part if u <= v else part[::-1])))
            if key in seen:
                continue
            seen.add(key)
            length = polyline_length_m([p[0] for p in part], [p[1] for p in part])
            if length <= 0.0:
                continue
            graph.edges.append(Edge(u=u, v=v, tier=tier, length_m=length,
                                    polyline=list(part)))
    return graph


def count_intersections(graph: RoadGraph) -> int:
    """Number of nodes with degree >= 3."""
    return sum(1 for d in graph.degrees().values() if d >= 3)


def total_length(graph: RoadGraph, clip: GridCell | None = None,
                 min_tier: RoadTier | None = None) -> float:
    """Summed edge length in meters, geometrically clipped to a cell bbox."""
    if clip is None and min_tier is None:
        return sum(e.length_m for e in graph.edges)
    bbox = clip.bbox if clip is not None else None
    total = 0.0
    for e in graph.edges:
        if min_tier is not None and e.tier < min_tier:
            continue
        if bbox is None:
            total += e.length_m
            continue
        pts = e.polyline
        for (x0, y0), (x1, y1) in zip(pts[:-1], pts[1:]):
            clipped = clip_segment(x0, y0, x1, y1, bbox[0], bbox[1], bbox[2], bbox[3])
            if clipped is None:
                continue
            (cx0, cy0), (cx1, cy1) = clipped
            total += haversine_m(cx0, cy0, cx1, cy1)
    return total


def bearing_histogram(graph: RoadGraph, bins: int = 36) -> np.ndarray:
    """Length-weighted histogram of undirected segment bearings over [0, 180)."""
    if bins < 2:
        raise ValueError("bins must be >= 2")
    hist = np.zeros(bins, dtype=float)
    width = 180.0 / bins
    for e in graph.edges:
        pts = e.polyline
        for (x0, y0), (x1, y1) in zip(pts[:-1], pts[1:]):
            seg_len = haversine_m(x0, y0, x1, y1)
            if seg_len == 0.0:
                continue
            b = bearing_deg(x0, y0, x1, y1) % 180.0
            hist[int(b / width) % bins] += seg_len
    return hist


@dataclass
class Block:
    ring: list       # closed [(lon, lat), ...]
    area_m2: float


def polygonize_blocks(graph: RoadGraph, clip: GridCell | None = None) -> list[Block]:
    """Bounded faces of the planar subdivision induced by the (optionally
    clipped) edges; the unbounded face is excluded by construction."""
    lines = []
    for e in graph.edges:
        if len(e.polyline) >= 2:
            lines.append(LineString(e.polyline))
    if not lines:
        return []
    merged = unary_union(lines)
    if clip is not None:
        merged = merged.intersection(box(*clip.bbox))
        if merged.is_empty:
            return []
    blocks = []
    for poly in polygonize(merged):
        ring = list(poly.exterior.coords)
        area = polygon_area_m2([p[0] for p in ring], [p[1] for p in ring])
        if area > 0.0:
            blocks.append(Block(ring=ring, area_m2=area))
    return blocks


def to_geojson(graph: RoadGraph) -> str:
    """Debug dump: edges as GeoJSON LineStrings with a `tier` property."""
    features = [{
        "type": "Feature",
        "geometry": {"type": "LineString",
                     "coordinates": [[lon, lat] for lon, lat in e.polyline]},
        "properties": {"tier": str(e.tier), "length_m": round(e.length_m, 3)},
    } for e in graph.edges]
    return json.dumps({"type": "FeatureCollection", "features": features})
