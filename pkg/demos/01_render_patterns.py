"""Generate one synthetic road network per pattern category and save its
colored road-hierarchy diagram (CRHD) next to this script.

Run:  python3 demos/01_render_patterns.py
"""
from pathlib import Path

from morphogrid.categories import RoadCategory
from morphogrid.crhd import render_crhd, save_png
from morphogrid.synth import SynthParams, gen_category

OUT = Path(__file__).parent

params = SynthParams(seed=42, jitter=0.08)
for category in RoadCategory:
    graph = gen_category(category, params)
    image = render_crhd(graph, params.base, params.extent_m / 2.0, size_px=256)
    path = OUT / f"pattern_{category}.png"
    save_png(image, path)
    print(f"{category:>10}: {len(graph.edges):4d} edges -> {path.name}")
