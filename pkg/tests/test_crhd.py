import numpy as np
import pytest

from conftest import grid_roads
from morphogrid.crhd import (BACKGROUND, DEFAULT_COLORS, DEFAULT_WIDTHS,
                             Palette, cell_half_width_m, load_png, render_crhd,
                             render_for_cell, save_png, truncate_minor)
from morphogrid.geodata import GeoPoint, UrbanExtract, cell_containing
from morphogrid.roadgraph import RoadTier, build_graph

CENTER = GeoPoint(0.0, 0.0)


def render(roads, radius_m=1000.0, size_px=128):
    return render_crhd(build_graph(roads), CENTER, radius_m, size_px)


class TestPalette:
    def test_default_valid(self):
        Palette(colors=dict(DEFAULT_COLORS), widths=dict(DEFAULT_WIDTHS),
                background=BACKGROUND)

    def test_lightness_must_increase(self):
        colors = dict(DEFAULT_COLORS)
        colors[RoadTier.MINOR] = (0, 0, 0)  # darker than motorway
        with pytest.raises(ValueError):
            Palette(colors=colors, widths=dict(DEFAULT_WIDTHS),
                    background=BACKGROUND)

    def test_widths_must_decrease(self):
        widths = dict(DEFAULT_WIDTHS)
        widths[RoadTier.MINOR] = 9
        with pytest.raises(ValueError):
            Palette(colors=dict(DEFAULT_COLORS), widths=widths,
                    background=BACKGROUND)


class TestRenderCrhd:
    def test_empty_graph_uniform_background(self):
        img = render([])
        assert (img.pixels == np.array(BACKGROUND)).all()

    def test_horizontal_motorway_band(self):
        img = render([([(-0.02, 0.0), (0.02, 0.0)], "motorway")],
                     radius_m=1000.0, size_px=128)
        color = np.array(DEFAULT_COLORS[RoadTier.MOTORWAY])
        mask = (img.pixels == color).all(axis=2)
        rows = np.flatnonzero(mask.any(axis=1))
        assert len(rows) == 5                      # width-5 band
        assert abs(rows.mean() - 63.5) <= 3        # through the center
        span = mask.any(axis=0).sum()
        assert abs(mask.sum() - 5 * span) <= 5 * 5  # rectangle up to end caps

    def test_byte_determinism(self):
        roads = grid_roads(4, spacing=0.002, origin=(-0.003, -0.003))
        a = render(roads)
        b = render(roads)
        assert a.pixels.tobytes() == b.pixels.tobytes()

    def test_size_floor(self):
        with pytest.raises(ValueError):
            render([], size_px=32)

    def test_pixel_colors_subset_of_palette(self):
        roads = [([(-0.005, 0.0), (0.005, 0.0)], "motorway"),
                 ([(0.0, -0.005), (0.0, 0.005)], "primary"),
                 ([(-0.005, -0.002), (0.005, -0.002)], "secondary"),
                 ([(-0.005, 0.002), (0.005, 0.002)], "tertiary"),
                 ([(-0.002, -0.005), (-0.002, 0.005)], "residential")]
        img = render(roads, radius_m=800.0)
        allowed = {BACKGROUND} | {tuple(c) for c in DEFAULT_COLORS.values()}
        seen = {tuple(p) for p in img.pixels.reshape(-1, 3)}
        assert seen <= allowed

    def test_tier_overdraw(self):
        # Minor and motorway cross at the center: motorway color must win.
        roads = [([(0.0, -0.005), (0.0, 0.005)], "residential"),
                 ([(-0.005, 0.0), (0.005, 0.0)], "motorway")]
        img = render(roads, radius_m=800.0, size_px=128)
        center = tuple(img.pixels[64, 64])
        assert center == DEFAULT_COLORS[RoadTier.MOTORWAY]

    def test_translation_consistency(self):
        roads = grid_roads(3, spacing=0.002, origin=(-0.002, -0.002))
        img_a = render_crhd(build_graph(roads), CENTER, 1000.0, 128)
        dx, dy = 0.5, 0.25
        shifted = [([(x + dx, y + dy) for x, y in line], tag)
                   for line, tag in roads]
        img_b = render_crhd(build_graph(shifted), GeoPoint(dx, dy), 1000.0, 128)
        assert img_a.pixels.tobytes() == img_b.pixels.tobytes()


class TestTruncateMinor:
    def test_background_unchanged(self):
        img = render([])
        out = truncate_minor(img)
        assert (out.pixels == img.pixels).all()

    def test_light_pixel_truncated(self):
        img = render([([(-0.005, 0.0), (0.005, 0.0)], "residential")],
                     radius_m=800.0)
        assert (img.pixels == np.array(DEFAULT_COLORS[RoadTier.MINOR])) \
            .all(axis=2).any()
        out = truncate_minor(img, rgb_floor=200)
        assert (out.pixels == np.array(BACKGROUND)).all()

    def test_black_pixel_unchanged(self):
        img = render([([(-0.005, 0.0), (0.005, 0.0)], "motorway")],
                     radius_m=800.0)
        out = truncate_minor(img, rgb_floor=200)
        assert (out.pixels == img.pixels).all()

    def test_idempotent(self):
        roads = grid_roads(4, spacing=0.002, origin=(-0.003, -0.003))
        once = truncate_minor(render(roads))
        twice = truncate_minor(once)
        assert once.pixels.tobytes() == twice.pixels.tobytes()


class TestRenderForCell:
    CELL = cell_containing(0.001, 0.001)

    def test_empty_surroundings(self):
        extract = UrbanExtract()
        img = render_for_cell(extract, self.CELL, size_px=128)
        assert (img.pixels == np.array(BACKGROUND)).all()

    def test_radius_is_doubled_extent(self):
        img = render_for_cell(UrbanExtract(), self.CELL, size_px=128)
        assert img.radius_m == pytest.approx(2 * cell_half_width_m(self.CELL))

    def test_road_outside_cell_visible(self):
        west, south, east, north = self.CELL.bbox
        margin = (east - west) * 0.3
        y = (south + north) / 2
        # A primary road entirely east of the cell but inside the doubled window.
        extract = UrbanExtract(roads=[([(east + margin, y - 0.002),
                                        (east + margin, y + 0.002)], "primary")])
        img = render_for_cell(extract, self.CELL, size_px=128)
        color = np.array(DEFAULT_COLORS[RoadTier.PRIMARY])
        assert (img.pixels == color).all(axis=2).any()

    def test_minor_truncated_by_default(self):
        west, south, east, north = self.CELL.bbox
        y = (south + north) / 2
        extract = UrbanExtract(roads=[([(west, y), (east, y)], "residential")])
        img = render_for_cell(extract, self.CELL, size_px=128)
        assert (img.pixels == np.array(BACKGROUND)).all()
        kept = render_for_cell(extract, self.CELL, size_px=128, truncate=False)
        assert not (kept.pixels == np.array(BACKGROUND)).all()


class TestPngIo:
    def test_round_trip(self, tmp_path):
        img = render([([(-0.005, 0.0), (0.005, 0.0)], "motorway")])
        path = tmp_path / "out.png"
        save_png(img, path)
        pixels = load_png(path)
        assert (pixels == img.pixels).all()
