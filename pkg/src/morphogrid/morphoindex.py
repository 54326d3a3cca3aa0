"""Per-cell morphological indices and feature-matrix assembly.

Eleven indices per built cell: the four category probabilities, road
density, intersection density, building density, average building
footprint area, block density, average block area, and land-use mixture
(Shannon entropy, natural log).

Edge conventions: footprints and blocks count for a cell when they
intersect it; the averages use full (unclipped) feature areas while the
densities use clipped areas. Overlapping footprints are unioned before
the covered-area computation so building density never exceeds 1.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from shapely.geometry import Polygon, box
from shapely.ops import unary_union

from .categories import as_probs
from .geodata import GridCell, UrbanExtract
from .geomath import polygon_area_m2
from .roadgraph import RoadGraph, RoadTier, polygonize_blocks, total_length

BASELINE_COLUMNS = ("rd", "ind", "bud", "abfa", "bld", "aba", "lum")
# Table-style fixed order: probabilities first (radial, organic, gridiron,
# no pattern), then the traditional indices
AUGMENTED_COLUMNS = ("prob_r", "prob_o", "prob_g", "prob_n") + BASELINE_COLUMNS
CSV_COLUMNS = ("prob_g", "prob_o", "prob_r", "prob_n") + BASELINE_COLUMNS


@dataclass
class MorphoVector:
    prob_g: float
    prob_o: float
    prob_r: float
    prob_n: float
    rd: float      # m / km^2
    ind: float     # km^-2
    bud: float     # fraction of cell covered by footprints
    abfa: float    # m^2
    bld: float     # km^-2
    aba: float     # m^2
    lum: float     # nats

    def get(self, name: str) -> float:
        return float(getattr(self, name))


def land_use_mixture(proportions) -> float:
    """Shannon entropy (nats) of land-use area proportions.

    Raw areas are renormalized; zero terms contribute nothing; an all-zero
    input yields 0."""
    p = np.asarray(proportions, dtype=float)
    if np.any(p < 0):
        raise ValueError("proportions must be nonnegative")
    total = p.sum()
    if total == 0.0:
        return 0.0
    p = p / total
    p = p[p > 0]
    return float(-(p * np.log(p)).sum())


def _shape_area_m2(geom) -> float:
    """Spheroid-ish area of a shapely polygon or multipolygon."""
    if geom.is_empty:
        return 0.0
    if geom.geom_type == "Polygon":
        ring = list(geom.exterior.coords)
        area = polygon_area_m2([p[0] for p in ring], [p[1] for p in ring])
        for hole in geom.interiors:
            ring = list(hole.coords)
            area -= polygon_area_m2([p[0] for p in ring], [p[1] for p in ring])
        return max(area, 0.0)
    if geom.geom_type in ("MultiPolygon", "GeometryCollection"):
        return sum(_shape_area_m2(g) for g in geom.geoms
                   if g.geom_type in ("Polygon", "MultiPolygon"))
    return 0.0


def compute_indices(cell: GridCell, extract: UrbanExtract, graph: RoadGraph,
                    probs, blocks=None,
                    intersection_min_tier: RoadTier | None = None) -> MorphoVector:
    """All 11 indices for one grid cell.

    `blocks` may carry precomputed planar faces of the whole graph to avoid
    re-polygonizing per cell. `intersection_min_tier` optionally restricts
    the intersection count to higher road tiers."""
    p = as_probs(probs)
    area_km2 = cell.area_km2
    west, south, east, north = cell.bbox
    cell_box = box(west, south, east, north)

    rd = total_length(graph, clip=cell) / area_km2

    degrees = graph.degrees()
    n_int = 0
    for nid, deg in degrees.items():
        if deg < 3:
            continue
        if intersection_min_tier is not None:
            deg = sum(1 for e in graph.edges
                      if intersection_min_tier <= e.tier and nid in (e.u, e.v))
            if deg < 3:
                continue
        lon, lat = graph.nodes[nid]
        if west <= lon < east and south <= lat < north:
            n_int += 1
    ind = n_int / area_km2

    footprints = [Polygon(b) for b in extract.buildings if len(b) >= 4]
    touching = [fp for fp in footprints if fp.intersects(cell_box)]
    if touching:
        covered = unary_union([fp.intersection(cell_box) for fp in touching])
        # Same area formula for numerator and denominator, so full coverage
        # gives exactly 1.
        bud = min(_shape_area_m2(covered) / _shape_area_m2(cell_box), 1.0)
        abfa = float(np.mean([_shape_area_m2(fp) for fp in touching]))
    else:
        bud = 0.0
        abfa = 0.0

    if blocks is None:
        blocks = polygonize_blocks(graph)
    cell_blocks = [blk for blk in blocks
                   if Polygon(blk.ring).intersects(cell_box)]
    if cell_blocks:
        bld = len(cell_blocks) / area_km2
        aba = float(np.mean([blk.area_m2 for blk in cell_blocks]))
    else:
        bld = 0.0
        aba = 0.0

    by_category: dict = {}
    for ring, category in extract.landuse:
        poly = Polygon(ring)
        if not poly.intersects(cell_box):
            continue
        clipped = _shape_area_m2(poly.intersection(cell_box))
        if clipped > 0:
            by_category[category] = by_category.get(category, 0.0) + clipped
    lum = land_use_mixture(list(by_category.values())) if by_category else 0.0

    return MorphoVector(prob_g=p[0], prob_o=p[1], prob_r=p[2], prob_n=p[3],
                        rd=rd, ind=ind, bud=bud, abfa=abfa, bld=bld, aba=aba,
                        lum=lum)


def assemble_matrix(cells, vectors, include_probs: bool):
    """Feature matrix and column names; probability columns included only
    for the augmented variant, in the fixed documented order."""
    if len(cells) != len(vectors):
        raise ValueError("cells and vectors must align")
    columns = AUGMENTED_COLUMNS if include_probs else BASELINE_COLUMNS
    matrix = np.array([[v.get(c) for c in columns] for v in vectors],
                      dtype=float).reshape(len(vectors), len(columns))
    return matrix, list(columns)
