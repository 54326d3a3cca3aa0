"""Procedural generation of labelled road networks for the four pattern
categories, used for classifier training and as test oracles.

Networks are laid out in a local meter frame and mapped to lon/lat around
a base point near the equator; everything is a pure function of the seed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .categories import RoadCategory
from .crhd import CrhdImage, Palette, render_crhd, truncate_minor
from .geodata import GeoPoint
from .geomath import EARTH_RADIUS_M
from .roadgraph import RoadGraph, build_graph

_DEG_PER_M = 180.0 / (math.pi * EARTH_RADIUS_M)


@dataclass(frozen=True)
class SynthParams:
    seed: int = 0
    extent_m: float = 2000.0
    jitter: float = 0.0
    spacing_m: float = 160.0       # gridiron street spacing
    spokes: int = 8                # radial spoke count
    rings: int = 3                 # radial ring count
    walk_step_m: float = 80.0      # organic major-road step
    base: GeoPoint = field(default_factory=lambda: GeoPoint(0.0, 0.0))

    def __post_init__(self):
        if self.extent_m <= 0:
            raise ValueError("extent_m must be positive")
        if not (0.0 <= self.jitter < 1.0):
            raise ValueError("jitter must lie in [0, 1)")
        if self.spokes < 4:
            raise ValueError("radial networks need at least 4 spokes")


def _to_lonlat(xy, base: GeoPoint):
    coslat = math.cos(math.radians(base.lat))
    return [(base.lon + x * _DEG_PER_M / coslat, base.lat + y * _DEG_PER_M)
            for x, y in xy]


def _grid_tier_tag(index: int) -> str:
    if index % 8 == 0:
        return "primary"
    if index % 4 == 0:
        return "secondary"
    if index % 2 == 0:
        return "tertiary"
    return "residential"


def _gen_gridiron(params: SynthParams, rng) -> list:
    half = params.extent_m / 2.0
    n = int(params.extent_m // params.spacing_m)
    offsets = [-half + i * params.spacing_m for i in range(n + 1)]
    jit = params.jitter * params.spacing_m
    xs = [o + rng.uniform(-jit, jit) for o in offsets]
    ys = [o + rng.uniform(-jit, jit) for o in offsets]
    ways = []
    for i, x in enumerate(xs):
        # vertices at every crossing so the graph picks up intersections
        line = [(x, y) for y in ys]
        ways.append((_to_lonlat(line, params.base), _grid_tier_tag(i)))
    for j, y in enumerate(ys):
        line = [(x, y) for x in xs]
        ways.append((_to_lonlat(line, params.base), _grid_tier_tag(j + 1)))
    return ways


def _gen_radial(params: SynthParams, rng) -> list:
    half = params.extent_m / 2.0
    ring_radii = [half * (i + 1) / (params.rings + 1) for i in range(params.rings)]
    jit = params.jitter * 0.1 * params.extent_m
    ways = []
    for s in range(params.spokes):
        angle = 2.0 * math.pi * s / params.spokes + rng.uniform(-1, 1) * params.jitter * 0.3
        ca, sa = math.cos(angle), math.sin(angle)
        pts = [(0.0, 0.0)]
        for r in ring_radii:
            pts.append((r * ca, r * sa))
        pts.append((half * ca + rng.uniform(-jit, jit),
                    half * sa + rng.uniform(-jit, jit)))
        ways.append((_to_lonlat(pts, params.base), "primary"))
    for k, r in enumerate(ring_radii):
        ring = []
        for s in range(params.spokes):
            angle = 2.0 * math.pi * s / params.spokes + rng.uniform(-1, 1) * params.jitter * 0.3
            ring.append((r * math.cos(angle), r * math.sin(angle)))
        ring.append(ring[0])
        ways.append((_to_lonlat(ring, params.base),
                     "secondary" if k % 2 == 0 else "tertiary"))
    return ways


def _random_walk(rng, start, heading, step, half, max_turn_deg=25.0, max_steps=200):
    pts = [start]
    x, y = start
    for _ in range(max_steps):
        heading += math.radians(rng.uniform(-max_turn_deg, max_turn_deg))
        x += step * math.cos(heading)
        y += step * math.sin(heading)
        pts.append((x, y))
        if abs(x) > half or abs(y) > half:
            break
    return pts


def _gen_organic(params: SynthParams, rng) -> list:
    half = params.extent_m / 2.0
    ways = []
    n_major = 6
    for i in range(n_major):
        side = i % 4
        t = rng.uniform(-0.8, 0.8) * half
        start, heading = {
            0: ((-half, t), 0.0),
            1: ((half, t), math.pi),
            2: ((t, -half), math.pi / 2.0),
            3: ((t, half), -math.pi / 2.0),
        }[side]
        heading += rng.uniform(-0.4, 0.4)
        pts = _random_walk(rng, start, heading, params.walk_step_m, half)
        ways.append((_to_lonlat(pts, params.base),
                     "secondary" if i % 2 == 0 else "tertiary"))
    for _ in range(12):
        start = (rng.uniform(-half, half), rng.uniform(-half, half))
        pts = _random_walk(rng, start, rng.uniform(0, 2 * math.pi),
                           params.walk_step_m * 0.6, half, max_steps=8)
        ways.append((_to_lonlat(pts, params.base), "residential"))
    return ways


def _gen_no_pattern(params: SynthParams, rng) -> list:
    half = params.extent_m / 2.0
    ways = []
    # total length stays well under 30% of the gridiron default
    for i in range(8):
        start = (rng.uniform(-half, half), rng.uniform(-half, half))
        pts = _random_walk(rng, start, rng.uniform(0, 2 * math.pi),
                           params.walk_step_m, half, max_turn_deg=60.0, max_steps=4)
        ways.append((_to_lonlat(pts, params.base),
                     "tertiary" if i < 2 else "residential"))
    return ways


_GENERATORS = {
    RoadCategory.GRIDIRON: _gen_gridiron,
    RoadCategory.ORGANIC: _gen_organic,
    RoadCategory.RADIAL: _gen_radial,
    RoadCategory.NO_PATTERN: _gen_no_pattern,
}


def gen_category(category: RoadCategory, params: SynthParams) -> RoadGraph:
    """Generate one road network of the given category, deterministic in
    params.seed."""
    try:
        generator = _GENERATORS[RoadCategory(category)]
    except (KeyError, ValueError) as exc:
        raise ValueError(f"unknown category: {category!r}") from exc
    rng = np.random.default_rng(params.seed)
    return build_graph(generator(params, rng))


@dataclass
class DatasetItem:
    image: CrhdImage
    label: RoadCategory
    split: str        # "train" | "val" | "test"
    seed: int


def split_counts(n: int) -> tuple[int, int, int]:
    """80/10/10 per-class split sizes; validation and test each get at
    least one item when n allows."""
    n_val = max(1, round(0.1 * n)) if n >= 3 else 0
    n_test = max(1, round(0.1 * n)) if n >= 2 else 0
    return n - n_val - n_test, n_val, n_test


def gen_dataset(n_per_class: int, seed: int = 0, size_px: int = 128,
                params: SynthParams | None = None,
                palette: Palette | None = None,
                jitter: float = 0.12) -> list[DatasetItem]:
    """Render 4 * n_per_class labelled CRHDs (minor tier truncated) with a
    stratified 80/10/10 train/val/test split; pure in (n_per_class, seed)."""
    if n_per_class < 1:
        raise ValueError("n_per_class must be >= 1")
    base_params = params or SynthParams()
    items = []
    rng = np.random.default_rng(seed)
    for category in RoadCategory:
        n_train, n_val, n_test = split_counts(n_per_class)
        splits = ["train"] * n_train + ["val"] * n_val + ["test"] * n_test
        order = rng.permutation(n_per_class)
        for i in range(n_per_class):
            inst_seed = seed + 10_000 * int(category) + i
            inst = replace(base_params, seed=inst_seed,
                           jitter=float(rng.uniform(0.0, jitter)))
            graph = gen_category(category, inst)
            image = render_crhd(graph, inst.base, inst.extent_m / 2.0,
                                size_px=size_px, palette=palette)
            image = truncate_minor(image)
            items.append(DatasetItem(image=image, label=category,
                                     split=splits[order[i]], seed=inst_seed))
    return items


def write_manifest(items, paths, out_path) -> None:
    """Dataset manifest CSV: path,label,split."""
    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write("path,label,split\n")
        for item, path in zip(items, paths):
            fh.write(f"{path},{item.label},{item.split}\n")
