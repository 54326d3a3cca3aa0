import math

import numpy as np
import pytest

from morphogrid.geodata import GeoPoint, RasterGrid, cell_containing
from morphogrid.geomath import haversine_m
from morphogrid.vitality import (DEFAULT_EXCLUDE, INDICATORS,
                                 StandardizationStrategy, VitalityRecord,
                                 indicators_for_cell, kde_at_cell, standardize,
                                 vitality_score, zscore_columns)

CELL = cell_containing(0.004, 0.004)


class TestStrategy:
    def test_parse(self):
        assert StandardizationStrategy.parse("before") is \
            StandardizationStrategy.BEFORE_MERGING
        assert StandardizationStrategy.parse("after") is \
            StandardizationStrategy.AFTER_MERGING
        with pytest.raises(ValueError):
            StandardizationStrategy.parse("middle")


class TestKde:
    def test_no_points(self):
        assert kde_at_cell([], CELL) == 0.0

    def test_point_at_centroid(self):
        c = CELL.centroid
        val = kde_at_cell([(c.lon, c.lat)], CELL, bandwidth_m=500.0)
        assert val == pytest.approx(1e6 / (2 * math.pi * 500.0 ** 2), abs=1e-4)
        assert val == pytest.approx(0.6366, abs=1e-4)

    def test_two_points_hand_sum(self):
        c = CELL.centroid
        p1 = (c.lon + 0.002, c.lat)
        p2 = (c.lon, c.lat + 0.001)
        h = 500.0
        expected = 0.0
        for lon, lat in (p1, p2):
            d = haversine_m(c.lon, c.lat, lon, lat)
            expected += math.exp(-d * d / (2 * h * h))
        expected *= 1e6 / (2 * math.pi * h * h)
        assert kde_at_cell([p1, p2], CELL, h) == pytest.approx(expected, rel=1e-9)

    def test_cutoff_beyond_four_bandwidths(self):
        c = CELL.centroid
        far = (c.lon + 0.05, c.lat)  # ~5.5 km >> 4h = 2 km
        assert kde_at_cell([far], CELL, 500.0) == 0.0

    def test_bandwidth_validation(self):
        with pytest.raises(ValueError):
            kde_at_cell([], CELL, bandwidth_m=0.0)


class TestIndicatorsForCell:
    def test_empty_sources_all_missing(self):
        rec = indicators_for_cell(CELL, {})
        for name in INDICATORS:
            assert rec.indicator(name) is None

    def test_population_join(self):
        rec = indicators_for_cell(
            CELL, {"population": {(CELL.col, CELL.row): 1234.0}})
        assert rec.population == 1234.0

    def test_population_missing_row(self):
        rec = indicators_for_cell(CELL, {"population": {}})
        assert rec.population is None

    def test_uniform_ntl(self):
        raster = RasterGrid(origin=GeoPoint(lon=-0.05, lat=0.05),
                            cell_size=0.01, ncols=10, nrows=10,
                            nodata=-9999.0, values=np.full(100, 3.25))
        rec = indicators_for_cell(CELL, {"ntl": raster})
        assert rec.ntl == pytest.approx(3.25, abs=1e-12)

    def test_tweet_count(self):
        c = CELL.centroid
        pts = [(c.lon, c.lat), (c.lon + 1e-4, c.lat), (c.lon + 5, c.lat)]
        rec = indicators_for_cell(CELL, {"tweet": pts})
        assert rec.tweet_count == 2.0


def make_records(cities, values):
    """values: {city: list of 5-indicator rows}"""
    records = []
    for city in cities:
        for i, row in enumerate(values[city]):
            rec = VitalityRecord(city=city, cell=(i, 0))
            for name, v in zip(INDICATORS, row):
                setattr(rec, name, v)
            records.append(rec)
    return records


class TestStandardize:
    def test_before_merging_city_moments(self):
        rng = np.random.default_rng(0)
        values = {c: rng.uniform(0, 10, size=(6, 5)).tolist()
                  for c in ("a", "b")}
        records = make_records(("a", "b"), values)
        z = standardize(records, StandardizationStrategy.BEFORE_MERGING)
        for city, sl in (("a", slice(0, 6)), ("b", slice(6, 12))):
            block = z[sl]
            assert np.allclose(block.mean(axis=0), 0.0, atol=1e-9)
            assert np.allclose(block.std(axis=0), 1.0, atol=1e-9)

    def test_after_merging_pools(self):
        values = {"a": [[0, 0, 0, 0, 0]] * 2, "b": [[10, 10, 10, 10, 10]] * 2}
        records = make_records(("a", "b"), values)
        z = standardize(records, StandardizationStrategy.AFTER_MERGING)
        # Pooled z-scores keep the between-city offset.
        assert z[0, 0] == pytest.approx(-1.0)
        assert z[2, 0] == pytest.approx(1.0)

    def test_constant_indicator_zeros(self):
        values = {"a": [[5, 1, 0, 0, 0], [5, 2, 0, 0, 0], [5, 3, 0, 0, 0]]}
        records = make_records(("a",), values)
        z = standardize(records, StandardizationStrategy.BEFORE_MERGING)
        assert (z[:, 0] == 0.0).all()

    def test_missing_standardized_to_zero(self):
        records = make_records(("a",), {"a": [[1, 0, 0, 0, 0],
                                              [2, 0, 0, 0, 0],
                                              [3, 0, 0, 0, 0]]})
        records[1].poi_kde = None
        z = standardize(records, StandardizationStrategy.BEFORE_MERGING)
        assert z[1, 0] == 0.0
        assert z[0, 0] == pytest.approx(-1.0)

    def test_before_merging_needs_two_per_city(self):
        records = make_records(("a", "b"), {"a": [[1, 1, 1, 1, 1]],
                                            "b": [[1, 1, 1, 1, 1],
                                                  [2, 2, 2, 2, 2]]})
        with pytest.raises(ValueError):
            standardize(records, StandardizationStrategy.BEFORE_MERGING)

    def test_zscore_city_mean_near_zero(self):
        rng = np.random.default_rng(2)
        vals = rng.normal(size=(20, 3))
        cities = np.array(["a"] * 10 + ["b"] * 10)
        z = zscore_columns(vals, cities, StandardizationStrategy.BEFORE_MERGING)
        assert abs(z[:10].mean()) < 1e-9
        assert abs(z[10:].mean()) < 1e-9


class TestVitalityScore:
    def records(self, seed=0, n=8):
        rng = np.random.default_rng(seed)
        values = {c: rng.uniform(0, 10, size=(n, 5)).tolist()
                  for c in ("a", "b")}
        return make_records(("a", "b"), values)

    def test_min_zero_max_hundred(self):
        records = self.records()
        scores = vitality_score(records)
        assert scores.min() == 0.0
        assert scores.max() == 100.0
        for rec, s in zip(records, scores):
            assert rec.score == s

    def test_two_cells(self):
        records = make_records(("a",), {"a": [[0, 0, 0, 0, 0],
                                              [1, 1, 1, 1, 1]]})
        scores = vitality_score(records)
        assert sorted(scores) == [0.0, 100.0]

    def test_identical_sums_all_zero(self):
        records = make_records(("a",), {"a": [[1, 1, 1, 1, 1]] * 3})
        assert (vitality_score(records) == 0.0).all()

    def test_excluded_indicator_ignored(self):
        base = self.records()
        changed = self.records()
        for rec in changed:
            rec.tweet_count = 999.0  # excluded by default
        assert np.allclose(vitality_score(base), vitality_score(changed))

    def test_constant_indicator_exclusion_no_effect(self):
        records = self.records()
        for rec in records:
            rec.ntl = 7.0
        with_ntl = vitality_score(records, exclude=DEFAULT_EXCLUDE)
        without = vitality_score(records,
                                 exclude=DEFAULT_EXCLUDE | {"ntl"})
        assert np.allclose(with_ntl, without)

    def test_affine_invariance_before_merging(self):
        base = self.records()
        scaled = self.records()
        for rec in scaled:
            rec.population = rec.population * 3.0 + 40.0
        assert np.allclose(vitality_score(base), vitality_score(scaled))

    def test_monotone_in_included_indicator(self):
        rng = np.random.default_rng(7)
        for _ in range(25):
            records = self.records(seed=int(rng.integers(1e6)))
            scores = vitality_score(records)
            i = int(rng.integers(len(records)))
            records[i].poi_kde = records[i].poi_kde + rng.uniform(0.1, 5.0)
            bumped = vitality_score(records)
            others = [j for j in range(len(records)) if j != i]
            # Rank of the bumped cell never decreases.
            before_rank = sum(scores[i] >= scores[j] for j in others)
            after_rank = sum(bumped[i] >= bumped[j] for j in others)
            assert after_rank >= before_rank
