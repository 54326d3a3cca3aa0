"""Geodesic helpers shared across the package.

Distances use the haversine formula on a sphere of radius 6,371,000 m.
Areas use the WGS84 spheroid (zonal band formula for lat/lon-aligned
rectangles, spherical excess on the authalic sphere for general polygons).
"""
from __future__ import annotations

import math

import numpy as np

EARTH_RADIUS_M = 6_371_000.0

# WGS84
_A = 6_378_137.0
_F = 1.0 / 298.257223563
_B = _A * (1.0 - _F)
_E2 = _F * (2.0 - _F)
_E = math.sqrt(_E2)


def haversine_m(lon1, lat1, lon2, lat2):
    """Great-circle distance in meters. Accepts scalars or numpy arrays."""
    lon1, lat1, lon2, lat2 = (np.radians(np.asarray(v, dtype=float))
                              for v in (lon1, lat1, lon2, lat2))
    dlat = lat2 - lat1
    dlon = lon2 - lon1
    h = np.sin(dlat / 2.0) ** 2 + np.cos(lat1) * np.cos(lat2) * np.sin(dlon / 2.0) ** 2
    d = 2.0 * EARTH_RADIUS_M * np.arcsin(np.sqrt(np.clip(h, 0.0, 1.0)))
    if d.ndim == 0:
        return float(d)
    return d


def polyline_length_m(lons, lats):
    lons = np.asarray(lons, dtype=float)
    lats = np.asarray(lats, dtype=float)
    if lons.size < 2:
        return 0.0
    return float(np.sum(haversine_m(lons[:-1], lats[:-1], lons[1:], lats[1:])))


def bearing_deg(lon1, lat1, lon2, lat2):
    """Initial bearing from point 1 to point 2, degrees clockwise from north."""
    lon1, lat1, lon2, lat2 = (np.radians(np.asarray(v, dtype=float))
                              for v in (lon1, lat1, lon2, lat2))
    dlon = lon2 - lon1
    x = np.sin(dlon) * np.cos(lat2)
    y = np.cos(lat1) * np.sin(lat2) - np.sin(lat1) * np.cos(lat2) * np.cos(dlon)
    b = np.degrees(np.arctan2(x, y)) % 360.0
    if b.ndim == 0:
        return float(b)
    return b


def _zonal_band(lat_rad: float) -> float:
    """Antiderivative for spheroid area between the equator and a latitude."""
    s = math.sin(lat_rad)
    return s / (1.0 - _E2 * s * s) + math.atanh(_E * s) / _E


def rect_area_km2(west: float, south: float, east: float, north: float) -> float:
    """Area of a lat/lon-aligned rectangle on the WGS84 spheroid, in km^2."""
    dlon = math.radians(east - west)
    band = _zonal_band(math.radians(north)) - _zonal_band(math.radians(south))
    area_m2 = 0.5 * _A * _A * (1.0 - _E2) * dlon * band
    return abs(area_m2) / 1e6


def polygon_area_m2(lons, lats) -> float:
    """Area of a small lon/lat polygon via spherical excess on the authalic
    sphere. Ring may be open or closed; orientation is ignored."""
    lons = np.radians(np.asarray(lons, dtype=float))
    lats = np.radians(np.asarray(lats, dtype=float))
    if lons.size < 3:
        return 0.0
    if lons[0] != lons[-1] or lats[0] != lats[-1]:
        lons = np.append(lons, lons[0])
        lats = np.append(lats, lats[0])
    # authalic radius of WGS84
    r2 = _A * _A / 2.0 * (1.0 + (1.0 - _E2) / _E * math.atanh(_E))
    dlon = lons[1:] - lons[:-1]
    s = np.sum(dlon * (2.0 + np.sin(lats[:-1]) + np.sin(lats[1:])))
    return abs(s) * r2 / 2.0


def azimuthal_equidistant(lon, lat, lon0: float, lat0: float):
    """Project lon/lat to local x/y meters about (lon0, lat0).

    x grows east, y grows north; straight-line distance from the origin
    equals great-circle distance (azimuthal equidistant)."""
    d = haversine_m(lon0, lat0, lon, lat)
    theta = np.radians(bearing_deg(lon0, lat0, lon, lat))
    return d * np.sin(theta), d * np.cos(theta)


def clip_segment(x0, y0, x1, y1, xmin, ymin, xmax, ymax):
    """Liang-Barsky clip of a segment to an axis-aligned rectangle.

    Returns clipped endpoints ((cx0, cy0), (cx1, cy1)) or None if the
    segment lies entirely outside."""
    dx = x1 - x0
    dy = y1 - y0
    t0, t1 = 0.0, 1.0
    for p, q in ((-dx, x0 - xmin), (dx, xmax - x0),
                 (-dy, y0 - ymin), (dy, ymax - y0)):
        if p == 0.0:
            if q < 0.0:
                return None
            continue
        t = q / p
        if p < 0.0:
            if t > t1:
                return None
            if t > t0:
                t0 = t
        else:
            if t < t0:
                return None
            if t < t1:
                t1 = t
    return (x0 + t0 * dx, y0 + t0 * dy), (x0 + t1 * dx, y0 + t1 * dy)
