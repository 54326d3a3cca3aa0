"""Colored Road Hierarchy Diagram rendering.

Roads are projected into a local azimuthal-equidistant frame about the
image center and drawn with hard (non-antialiased) thick Bresenham
strokes, lowest tier first, so higher tiers always sit on top. Equal
inputs produce byte-identical pixel buffers.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from .geodata import GeoPoint, GridCell
from .geomath import azimuthal_equidistant, haversine_m
from .roadgraph import RoadGraph, RoadTier

DEFAULT_COLORS = {
    RoadTier.MOTORWAY: (0, 0, 0),
    RoadTier.PRIMARY: (198, 40, 40),
    RoadTier.SECONDARY: (239, 108, 0),
    RoadTier.TERTIARY: (120, 144, 156),
    RoadTier.MINOR: (224, 224, 224),
}
DEFAULT_WIDTHS = {
    RoadTier.MOTORWAY: 5,
    RoadTier.PRIMARY: 4,
    RoadTier.SECONDARY: 3,
    RoadTier.TERTIARY: 2,
    RoadTier.MINOR: 1,
}
BACKGROUND = (255, 255, 255)
MINOR_RGB_FLOOR = 200  # min(R,G,B) at/above this is treated as "light"


@dataclass(frozen=True)
class Palette:
    colors: dict = field(default_factory=lambda: dict(DEFAULT_COLORS))
    widths: dict = field(default_factory=lambda: dict(DEFAULT_WIDTHS))
    background: tuple = BACKGROUND

    def __post_init__(self):
        lightness = [sum(self.colors[t]) for t in
                     (RoadTier.MOTORWAY, RoadTier.PRIMARY, RoadTier.SECONDARY,
                      RoadTier.TERTIARY, RoadTier.MINOR)]
        if any(a >= b for a, b in zip(lightness[:-1], lightness[1:])):
            raise ValueError("tier lightness must strictly increase toward minor roads")
        widths = [self.widths[t] for t in
                  (RoadTier.MOTORWAY, RoadTier.PRIMARY, RoadTier.SECONDARY,
                   RoadTier.TERTIARY, RoadTier.MINOR)]
        if any(a <= b for a, b in zip(widths[:-1], widths[1:])):
            raise ValueError("stroke widths must strictly decrease toward minor roads")


@dataclass
class CrhdImage:
    pixels: np.ndarray       # (size, size, 3) uint8
    center: GeoPoint
    radius_m: float
    size_px: int


def _bresenham(x0: int, y0: int, x1: int, y1: int):
    """Integer line pixels from (x0,y0) to (x1,y1) inclusive."""
    dx = abs(x1 - x0)
    dy = -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    while True:
        yield x0, y0
        if x0 == x1 and y0 == y1:
            return
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x0 += sx
        if e2 <= dx:
            err += dx
            y0 += sy


def _stamp_offsets(width: int):
    """Square brush offsets for a stroke of the given pixel width."""
    lo = -(width // 2)
    hi = width + lo
    return [(dx, dy) for dy in range(lo, hi) for dx in range(lo, hi)]


def _draw_polyline(pixels: np.ndarray, pts, color, width: int):
    size = pixels.shape[0]
    offsets = _stamp_offsets(width)
    for (x0, y0), (x1, y1) in zip(pts[:-1], pts[1:]):
        for px, py in _bresenham(x0, y0, x1, y1):
            for dx, dy in offsets:
                x, y = px + dx, py + dy
                if 0 <= x < size and 0 <= y < size:
                    pixels[y, x] = color


def render_crhd(graph: RoadGraph, center: GeoPoint, radius_m: float,
                size_px: int = 512, palette: Palette | None = None) -> CrhdImage:
    """Rasterize a road graph into a CRHD around `center`.

    `radius_m` maps to half the image width; pixel y grows southward."""
    if radius_m <= 0:
        raise ValueError("radius_m must be positive")
    if size_px < 64:
        raise ValueError("size_px must be >= 64")
    palette = palette or Palette()
    pixels = np.empty((size_px, size_px, 3), dtype=np.uint8)
    pixels[:] = palette.background

    scale = (size_px / 2.0) / radius_m
    half = size_px / 2.0

    def project(lon, lat):
        x, y = azimuthal_equidistant(lon, lat, center.lon, center.lat)
        return (int(round(half + x * scale)), int(round(half - y * scale)))

    margin = 2.0 * radius_m  # skip edges entirely far outside the frame
    for tier in sorted(palette.colors, key=int):  # lowest tier first
        color = np.array(palette.colors[tier], dtype=np.uint8)
        width = palette.widths[tier]
        for e in graph.edges:
            if e.tier != tier:
                continue
            lons = [p[0] for p in e.polyline]
            lats = [p[1] for p in e.polyline]
            if min(haversine_m(center.lon, center.lat, lon, lat)
                   for lon, lat in zip(lons, lats)) > margin + e.length_m:
                continue
            pts = [project(lon, lat) for lon, lat in e.polyline]
            _draw_polyline(pixels, pts, color, width)
    return CrhdImage(pixels=pixels, center=center, radius_m=float(radius_m),
                     size_px=size_px)


def truncate_minor(image: CrhdImage, rgb_floor: int = MINOR_RGB_FLOOR) -> CrhdImage:
    """Erase light road pixels: any non-background pixel with
    min(R,G,B) >= rgb_floor becomes background. Idempotent."""
    px = image.pixels.copy()
    light = px.min(axis=2) >= rgb_floor
    bg = np.all(px == np.array(BACKGROUND, dtype=np.uint8), axis=2)
    px[light & ~bg] = BACKGROUND
    return CrhdImage(pixels=px, center=image.center, radius_m=image.radius_m,
                     size_px=image.size_px)


def cell_half_width_m(cell: GridCell) -> float:
    """Half the north-south extent of the cell in meters."""
    w, s, e, n = cell.bbox
    mid = (w + e) / 2.0
    return haversine_m(mid, s, mid, n) / 2.0


def render_for_cell(extract_or_graph, cell: GridCell, size_px: int = 512,
                    palette: Palette | None = None,
                    truncate: bool = True) -> CrhdImage:
    """CRHD for a grid cell: concentric with the cell but covering twice
    its extent; minor roads truncated by default."""
    from .roadgraph import build_graph
    graph = (extract_or_graph if isinstance(extract_or_graph, RoadGraph)
             else build_graph(extract_or_graph.roads))
    radius = 2.0 * cell_half_width_m(cell)
    image = render_crhd(graph, cell.centroid, radius, size_px, palette)
    if truncate:
        image = truncate_minor(image)
    return image


def save_png(image: CrhdImage, path) -> None:
    Image.fromarray(image.pixels, mode="RGB").save(path, format="PNG")


def load_png(path) -> np.ndarray:
    return np.asarray(Image.open(path).convert("RGB"), dtype=np.uint8)
