"""Urban-vitality indicators, standardization, and the 0-100 score.

Five indicators per cell: POI kernel density, tweet count, nighttime-light
brightness, population, and Airbnb-listing kernel density. Standardization
is a z-score either within each city (before merging) or over the pooled
table (after merging); the score is the min-max rescale of the summed
included z-scores onto [0, 100].
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .geodata import GridCell, RasterGrid, cell_containing, zonal_mean
from .geomath import haversine_m

INDICATORS = ("poi_kde", "tweet_count", "ntl", "population", "airbnb_kde")
DEFAULT_BANDWIDTH_M = 500.0
DEFAULT_EXCLUDE = frozenset({"tweet_count"})


class StandardizationStrategy(Enum):
    BEFORE_MERGING = "before"   # z-score within each city, then pool
    AFTER_MERGING = "after"     # z-score over the pooled table

    @classmethod
    def parse(cls, name: str) -> "StandardizationStrategy":
        for member in cls:
            if name in (member.value, member.name.lower()):
                return member
        raise ValueError(f"unknown standardization strategy: {name!r}")


@dataclass
class VitalityRecord:
    city: str
    cell: tuple                  # (col, row)
    poi_kde: float | None = None
    tweet_count: float | None = None
    ntl: float | None = None
    population: float | None = None
    airbnb_kde: float | None = None
    score: float | None = None

    def indicator(self, name: str):
        return getattr(self, name)


def kde_at_cell(points, cell: GridCell, bandwidth_m: float = DEFAULT_BANDWIDTH_M) -> float:
    """Gaussian kernel density (km^-2) at the cell centroid; points beyond
    a 4-bandwidth great-circle distance are ignored."""
    if bandwidth_m <= 0:
        raise ValueError("bandwidth_m must be positive")
    if not len(points):
        return 0.0
    c = cell.centroid
    lons = np.array([p[0] for p in points], dtype=float)
    lats = np.array([p[1] for p in points], dtype=float)
    d = haversine_m(np.full_like(lons, c.lon), np.full_like(lats, c.lat), lons, lats)
    d = d[d <= 4.0 * bandwidth_m]
    if d.size == 0:
        return 0.0
    h2 = bandwidth_m * bandwidth_m
    per_m2 = float(np.sum(np.exp(-d * d / (2.0 * h2)))) / (2.0 * np.pi * h2)
    return per_m2 * 1e6


def indicators_for_cell(cell: GridCell, sources: dict, city: str = "",
                        bandwidth_m: float = DEFAULT_BANDWIDTH_M) -> VitalityRecord:
    """Assemble one cell's indicator set from whichever sources are present.

    `sources` keys: "poi" / "tweet" / "airbnb" (point lists), "ntl"
    (RasterGrid), "population" ({(col,row): value}). Absent sources stay
    None (missing)."""
    rec = VitalityRecord(city=city, cell=(cell.col, cell.row))
    if "poi" in sources:
        rec.poi_kde = kde_at_cell(sources["poi"], cell, bandwidth_m)
    if "airbnb" in sources:
        rec.airbnb_kde = kde_at_cell(sources["airbnb"], cell, bandwidth_m)
    if "tweet" in sources:
        key = (cell.col, cell.row)
        rec.tweet_count = float(sum(
            1 for lon, lat in sources["tweet"]
            if (cell_containing(lon, lat).col, cell_containing(lon, lat).row) == key))
    if "ntl" in sources:
        raster = sources["ntl"]
        if isinstance(raster, RasterGrid):
            rec.ntl = zonal_mean(raster, cell)
    if "population" in sources:
        rec.population = sources["population"].get((cell.col, cell.row))
    return rec


def zscore_columns(values: np.ndarray, cities,
                   strategy: StandardizationStrategy) -> np.ndarray:
    """Column-wise z-scores of a (rows, indicators) matrix with NaN as
    missing. Missing values are excluded from the moments and standardized
    to 0; a zero-variance column becomes all zeros."""
    values = np.asarray(values, dtype=float)
    cities = np.asarray(cities)
    out = np.zeros_like(values)
    if strategy is StandardizationStrategy.AFTER_MERGING:
        groups = [np.ones(len(values), dtype=bool)]
    else:
        groups = [cities == c for c in dict.fromkeys(cities.tolist())]
    for mask in groups:
        block = values[mask]
        for j in range(values.shape[1]):
            col = block[:, j]
            ok = np.isfinite(col)
            if ok.sum() == 0:
                continue
            mu = col[ok].mean()
            sigma = col[ok].std()
            z = np.zeros_like(col)
            if sigma > 0:
                z[ok] = (col[ok] - mu) / sigma
            out[np.flatnonzero(mask), j] = z
    return out


def records_matrix(records) -> tuple[np.ndarray, np.ndarray]:
    """(rows, 5) indicator matrix with NaN for missing, plus the city array."""
    values = np.array([[np.nan if rec.indicator(name) is None
                        else float(rec.indicator(name)) for name in INDICATORS]
                       for rec in records], dtype=float)
    cities = np.array([rec.city for rec in records])
    return values, cities


def standardize(records, strategy: StandardizationStrategy) -> np.ndarray:
    """(rows, 5) z-score matrix for a list of VitalityRecord."""
    if strategy is StandardizationStrategy.BEFORE_MERGING:
        from collections import Counter
        counts = Counter(rec.city for rec in records)
        thin = [c for c, n in counts.items() if n < 2]
        if thin:
            raise ValueError(f"before-merging standardization needs >= 2 records "
                             f"per city; too few for: {sorted(thin)}")
    values, cities = records_matrix(records)
    return zscore_columns(values, cities, strategy)


def score_from_z(z: np.ndarray, exclude=DEFAULT_EXCLUDE) -> np.ndarray:
    """Min-max rescale of the summed included z-scores onto [0, 100]."""
    included = [j for j, name in enumerate(INDICATORS) if name not in exclude]
    sums = z[:, included].sum(axis=1)
    lo, hi = sums.min(initial=np.inf), sums.max(initial=-np.inf)
    if not np.isfinite(lo) or hi - lo <= 0.0:
        return np.zeros(len(z))
    return (sums - lo) / (hi - lo) * 100.0


def vitality_score(records,
                   strategy: StandardizationStrategy = StandardizationStrategy.BEFORE_MERGING,
                   exclude=DEFAULT_EXCLUDE) -> np.ndarray:
    """Standardize, sum, and rescale; also writes each record's `score`."""
    z = standardize(records, strategy)
    scores = score_from_z(z, exclude)
    for rec, s in zip(records, scores):
        rec.score = float(s)
    return scores
