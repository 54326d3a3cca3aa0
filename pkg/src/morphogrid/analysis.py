"""Post-hoc analyses: per-city category shares, city clustering,
category-conditioned vitality statistics, distribution curves, top-N
tables, baseline-vs-augmented model comparison, and categorical map export.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .categories import RoadCategory
from .gbm import GbmParams, Metrics, fit, metrics, predict

PATTERNED = (RoadCategory.GRIDIRON, RoadCategory.ORGANIC, RoadCategory.RADIAL)
SCORE_RANGES = ((0, 20), (20, 40), (40, 60), (60, 80), (80, 100))


@dataclass
class CityShares:
    city: str
    gridiron: float
    organic: float
    radial: float

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.gridiron, self.organic, self.radial])


def category_shares(categories, cities) -> list[CityShares]:
    """Per-city fractions of the three patterned categories; no-pattern
    cells are excluded from the denominator. Cities with zero patterned
    cells are dropped with a warning."""
    out = []
    for city in dict.fromkeys(cities):
        cats = [c for c, ct in zip(categories, cities) if ct == city]
        patterned = [c for c in cats if c != RoadCategory.NO_PATTERN]
        if not patterned:
            warnings.warn(f"city {city!r} has no patterned cells; excluded")
            continue
        n = len(patterned)
        out.append(CityShares(
            city=city,
            gridiron=sum(1 for c in patterned if c == RoadCategory.GRIDIRON) / n,
            organic=sum(1 for c in patterned if c == RoadCategory.ORGANIC) / n,
            radial=sum(1 for c in patterned if c == RoadCategory.RADIAL) / n))
    return out


# -- k-means over the share vectors ----------------------------------------

def _kmeans_once(points: np.ndarray, k: int, rng):
    """One seeded k-means++ run; returns (labels, inertia)."""
    n = len(points)
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[rng.integers(n)]
    d2 = np.sum((points - centers[0]) ** 2, axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total == 0:
            centers[i] = points[rng.integers(n)]
        else:
            centers[i] = points[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, np.sum((points - centers[i]) ** 2, axis=1))
    prev_inertia = np.inf
    labels = np.zeros(n, dtype=int)
    for _ in range(100):
        dists = np.sum((points[:, None, :] - centers[None]) ** 2, axis=2)
        labels = np.argmin(dists, axis=1)
        inertia = float(dists[np.arange(n), labels].sum())
        assert inertia <= prev_inertia + 1e-9
        reseeded = False
        for i in range(k):
            mask = labels == i
            if mask.any():
                centers[i] = points[mask].mean(axis=0)
            elif not reseeded:
                # one re-seed for an empty cluster, then accept the layout
                centers[i] = points[int(np.argmax(dists[np.arange(n), labels]))]
                reseeded = True
        if abs(prev_inertia - inertia) < 1e-12:
            break
        prev_inertia = inertia
    return labels, inertia


def cluster_cities(shares: list[CityShares], k: int = 4, seed: int = 0,
                   restarts: int = 50) -> dict:
    """k-means (k-means++ init, best of `restarts`) on the 3-share vectors.

    Returns {city: cluster label}; deterministic for a fixed seed."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > len(shares):
        raise ValueError("k exceeds city count")
    points = np.array([s.vector for s in shares])
    best_labels = None
    best_inertia = np.inf
    rng = np.random.default_rng(seed)
    for _ in range(restarts):
        labels, inertia = _kmeans_once(points, k, rng)
        if inertia < best_inertia - 1e-15:
            best_inertia = inertia
            best_labels = labels
    return {s.city: int(label) for s, label in zip(shares, best_labels)}


# -- category-conditioned statistics ----------------------------------------

@dataclass
class CategoryStats:
    mean: float
    median: float
    std: float
    n: int


def stats_by_category(scores, categories) -> dict:
    """Mean / median (lower-middle for even n) / population std of vitality
    scores per category; empty categories are omitted."""
    out = {}
    for cat in RoadCategory:
        vals = np.sort([s for s, c in zip(scores, categories) if c == cat])
        if len(vals) == 0:
            continue
        median = float(vals[(len(vals) - 1) // 2])
        out[cat] = CategoryStats(mean=float(vals.mean()), median=median,
                                 std=float(vals.std()), n=len(vals))
    return out


def proportion_by_range(scores, categories):
    """Per 20-wide score bin: category proportions and instance counts.

    Bins are [0,20), [20,40), [40,60), [60,80), [80,100]. Empty bins get
    None proportions and count 0."""
    scores = np.asarray(scores, dtype=float)
    if np.any(scores < 0) or np.any(scores > 100):
        raise ValueError("scores must lie in [0, 100]")
    out = []
    for lo, hi in SCORE_RANGES:
        if hi == 100:
            mask = (scores >= lo) & (scores <= hi)
        else:
            mask = (scores >= lo) & (scores < hi)
        count = int(mask.sum())
        if count == 0:
            out.append({"range": (lo, hi), "count": 0, "proportions": None})
            continue
        cats = [c for c, m in zip(categories, mask) if m]
        props = {cat: sum(1 for c in cats if c == cat) / count
                 for cat in RoadCategory}
        out.append({"range": (lo, hi), "count": count, "proportions": props})
    return out


def silverman_bandwidth(values: np.ndarray) -> float:
    sd = float(np.std(values, ddof=1)) if len(values) > 1 else 0.0
    if sd == 0.0:
        return 1.0
    return 1.06 * sd * len(values) ** (-1.0 / 5.0)


def kde_curve(scores, bandwidth: float | None = None, n_samples: int = 256):
    """Gaussian KDE of a score sample on [0, 100], evaluated at `n_samples`
    evenly spaced points. Returns (xs, density)."""
    scores = np.asarray(scores, dtype=float)
    if len(scores) < 2:
        raise ValueError("need at least 2 scores")
    h = bandwidth if bandwidth is not None else silverman_bandwidth(scores)
    xs = np.linspace(0.0, 100.0, n_samples)
    diff = (xs[:, None] - scores[None, :]) / h
    dens = np.exp(-0.5 * diff ** 2).sum(axis=1) / (len(scores) * h * np.sqrt(2 * np.pi))
    return xs, dens


def top_n_table(index_vectors, scores, categories, n: int = 10):
    """Mean morphological indices and mean score of the top-n cells per
    patterned category. Categories with fewer than n cells use all cells
    and are flagged `partial`."""
    out = {}
    for cat in PATTERNED:
        rows = [(s, v) for s, v, c in zip(scores, index_vectors, categories)
                if c == cat]
        if not rows:
            continue
        rows.sort(key=lambda r: -r[0])
        top = rows[:n]
        matrix = np.array([[getattr(v, name) for name in
                            ("rd", "ind", "bud", "abfa", "bld", "aba", "lum")]
                           for _, v in top])
        out[cat] = {
            "n": len(top),
            "partial": len(rows) < n,
            "mean_score": float(np.mean([s for s, _ in top])),
            "mean_indices": dict(zip(("rd", "ind", "bud", "abfa", "bld", "aba", "lum"),
                                     matrix.mean(axis=0).tolist())),
        }
    return out


# -- baseline vs augmented comparison ---------------------------------------

@dataclass
class ModelComparison:
    baseline: Metrics
    augmented: Metrics
    delta_r2: float
    delta_rmse: float
    delta_mae: float
    baseline_importance: np.ndarray = field(default=None)
    augmented_importance: np.ndarray = field(default=None)


def holdout_split(n: int, test_fraction: float = 0.2, seed: int = 0):
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    n_test = max(1, int(round(test_fraction * n)))
    return np.sort(order[n_test:]), np.sort(order[:n_test])


def compare_models(X_base, X_aug, y, params: GbmParams | None = None,
                   seed: int = 0) -> ModelComparison:
    """Fit baseline and augmented feature sets with identical params on an
    identical seeded 80/20 split; report test metrics and deltas."""
    params = params or GbmParams()
    X_base = np.asarray(X_base, dtype=float)
    X_aug = np.asarray(X_aug, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(X_base) != len(X_aug) or len(X_base) != len(y):
        raise ValueError("row counts must match")
    train, test = holdout_split(len(y), seed=seed)
    mb = fit(X_base[train], y[train], params)
    ma = fit(X_aug[train], y[train], params)
    base_m = metrics(y[test], predict(mb, X_base[test]))
    aug_m = metrics(y[test], predict(ma, X_aug[test]))
    return ModelComparison(
        baseline=base_m, augmented=aug_m,
        delta_r2=(aug_m.r2 or 0.0) - (base_m.r2 or 0.0),
        delta_rmse=aug_m.rmse - base_m.rmse,
        delta_mae=aug_m.mae - base_m.mae,
        baseline_importance=mb.split_counts.copy(),
        augmented_importance=ma.split_counts.copy())


# -- map export -------------------------------------------------------------

def export_categorical_map(cells, categories, probs, scores=None) -> str:
    """GeoJSON FeatureCollection: one rectangle per cell with category,
    probability, and score properties."""
    features = []
    for i, (cell, cat) in enumerate(zip(cells, categories)):
        w, s, e, n = cell.bbox
        p = np.asarray(probs[i], dtype=float)
        props = {
            "cell_col": cell.col, "cell_row": cell.row,
            "category": str(cat),
            "p_gridiron": float(p[0]), "p_organic": float(p[1]),
            "p_radial": float(p[2]), "p_nopattern": float(p[3]),
        }
        if scores is not None:
            props["score"] = float(scores[i])
        features.append({
            "type": "Feature",
            "geometry": {"type": "Polygon",
                         "coordinates": [[[w, s], [e, s], [e, n], [w, n], [w, s]]]},
            "properties": props,
        })
    return json.dumps({"type": "FeatureCollection", "features": features},
                      sort_keys=True)
