"""Four-category probability vectors for road networks.

Three interchangeable probability sources: the residual CNN (`cnn_forward`),
a graph-feature heuristic (`classify_heuristic`), and externally supplied
CSV probabilities (`load_external_probs`). Evaluation produces a confusion
matrix, overall accuracy, and one-vs-rest ROC/AUC.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .categories import PROB_COLUMNS, RoadCategory, as_probs, assign_category  # noqa: F401
from .cnn import CnnModel, preprocess, softmax
from .crhd import CrhdImage
from .roadgraph import RoadGraph, RoadTier, bearing_histogram, total_length
from .geomath import bearing_deg


def cnn_forward(model: CnnModel, image: CrhdImage | np.ndarray) -> np.ndarray:
    """Probability vector for one CRHD (resampled to the model input size)."""
    pixels = image.pixels if isinstance(image, CrhdImage) else image
    x = preprocess(pixels, model.input_size)[None]
    return as_probs(model.forward(x)[0])


# -- graph-feature heuristic ------------------------------------------------

# major-road density (m/km^2) below which a network reads as "no pattern"
DENSITY_FLOOR = 2000.0
_ALIGN_TOL_DEG = 15.0


def _orthogonal_mass(hist: np.ndarray) -> float:
    total = hist.sum()
    if total == 0:
        return 0.0
    half = len(hist) // 2
    paired = hist + np.roll(hist, -half)
    return float(paired.max() / total)


def _normalized_entropy(hist: np.ndarray) -> float:
    total = hist.sum()
    if total == 0:
        return 1.0
    p = hist[hist > 0] / total
    return float(-(p * np.log(p)).sum() / np.log(len(hist)))


def _radial_alignment(graph: RoadGraph, min_tier=RoadTier.TERTIARY) -> float:
    """Length fraction of major segments whose bearing points within 15
    degrees of the maximum-degree node."""
    degrees = graph.degrees()
    if not degrees:
        return 0.0
    hub = max(degrees, key=lambda nid: (degrees[nid], -nid))
    hub_lon, hub_lat = graph.nodes[hub]
    aligned = 0.0
    total = 0.0
    from .geomath import haversine_m
    for e in graph.edges:
        if e.tier < min_tier:
            continue
        pts = e.polyline
        for (x0, y0), (x1, y1) in zip(pts[:-1], pts[1:]):
            seg_len = haversine_m(x0, y0, x1, y1)
            if seg_len == 0.0:
                continue
            total += seg_len
            mx, my = (x0 + x1) / 2.0, (y0 + y1) / 2.0
            if (mx, my) == (hub_lon, hub_lat):
                aligned += seg_len
                continue
            seg_b = bearing_deg(x0, y0, x1, y1) % 180.0
            to_hub = bearing_deg(mx, my, hub_lon, hub_lat) % 180.0
            diff = abs(seg_b - to_hub)
            if min(diff, 180.0 - diff) <= _ALIGN_TOL_DEG:
                aligned += seg_len
    if total == 0.0:
        return 0.0
    return aligned / total


def classify_heuristic(graph: RoadGraph, extent_m: float) -> np.ndarray:
    """Probability vector from interpretable graph features.

    Scores: gridiron from bearing-histogram concentration in two
    orthogonal modes; radial from major-segment alignment toward the
    highest-degree node; no pattern from a major-road density floor;
    organic as the residual baseline. Softmax at temperature 1."""
    hist = bearing_histogram(graph, 36)
    ortho = _orthogonal_mass(hist)
    entropy = _normalized_entropy(hist)
    align = _radial_alignment(graph)
    area_km2 = (extent_m / 1000.0) ** 2
    major_density = total_length(graph, min_tier=RoadTier.TERTIARY) / area_km2

    score_grid = 2.5 * (ortho - 0.5) + (1.0 - entropy)
    score_radial = 5.0 * (align - 0.2)
    score_nopat = 6.0 * (1.0 - major_density / DENSITY_FLOOR)
    score_organic = 0.8
    scores = np.array([score_grid, score_organic, score_radial, score_nopat])
    return as_probs(softmax(scores))


# -- evaluation -------------------------------------------------------------

@dataclass
class EvalReport:
    confusion: np.ndarray                 # 4x4 row-normalized; nan rows -> no support
    overall_accuracy: float
    auc: dict = field(default_factory=dict)         # category -> AUC or None
    roc: dict = field(default_factory=dict)         # category -> (fpr, tpr)
    support: np.ndarray = None

    def format(self) -> str:
        names = [str(c) for c in RoadCategory]
        lines = [f"overall accuracy: {self.overall_accuracy:.4f}",
                 "confusion (rows = truth, row-normalized):"]
        header = " " * 12 + "".join(f"{n:>11}" for n in names)
        lines.append(header)
        for i, n in enumerate(names):
            row = self.confusion[i]
            cells = "".join("       --- " if np.isnan(v) else f"{v:>11.3f}"
                            for v in row)
            lines.append(f"{n:>12}{cells}")
        for c in RoadCategory:
            a = self.auc.get(c)
            lines.append(f"AUC {str(c):>10}: " + ("---" if a is None else f"{a:.4f}"))
        return "\n".join(lines)


def _roc_curve(scores: np.ndarray, labels: np.ndarray):
    """One-vs-rest ROC points; labels are 0/1. Returns (fpr, tpr) arrays."""
    order = np.argsort(-scores, kind="stable")
    labels = labels[order]
    tp = np.concatenate([[0], np.cumsum(labels)])
    fp = np.concatenate([[0], np.cumsum(1 - labels)])
    n_pos = tp[-1]
    n_neg = fp[-1]
    if n_pos == 0 or n_neg == 0:
        return None
    return fp / n_neg, tp / n_pos


def evaluate(predictions, truths) -> EvalReport:
    """predictions: sequence of 4-vectors; truths: sequence of RoadCategory."""
    if len(truths) == 0:
        raise ValueError("empty test set")
    probs = np.asarray(predictions, dtype=float)
    y = np.asarray([int(t) for t in truths])
    pred = np.argmax(probs, axis=1)
    counts = np.zeros((4, 4), dtype=float)
    for t, p in zip(y, pred):
        counts[t, p] += 1
    support = counts.sum(axis=1)
    confusion = np.full((4, 4), np.nan)
    for i in range(4):
        if support[i] > 0:
            confusion[i] = counts[i] / support[i]
    accuracy = float(np.trace(counts) / len(y))
    auc = {}
    roc = {}
    for c in RoadCategory:
        curve = _roc_curve(probs[:, int(c)], (y == int(c)).astype(int))
        if curve is None:
            auc[c] = None
            roc[c] = None
        else:
            fpr, tpr = curve
            auc[c] = float(np.trapezoid(tpr, fpr))
            roc[c] = (fpr, tpr)
    return EvalReport(confusion=confusion, overall_accuracy=accuracy,
                      auc=auc, roc=roc, support=support)


# -- external probability source -------------------------------------------

class ProbsFormatError(ValueError):
    pass


def load_external_probs(text: str):
    """Read `cell_col,cell_row,p_gridiron,p_organic,p_radial,p_nopattern`.

    Rows whose probabilities sum to 1 within 1e-3 are renormalized;
    out-of-range rows are rejected and counted. Returns
    ({(col, row): probs}, n_rejected)."""
    reader = csv.DictReader(io.StringIO(text))
    required = {"cell_col", "cell_row", *PROB_COLUMNS}
    if reader.fieldnames is None or not required.issubset(reader.fieldnames):
        missing = sorted(required - set(reader.fieldnames or []))
        raise ProbsFormatError(f"probability CSV missing columns: {missing}")
    out = {}
    rejected = 0
    for rec in reader:
        p = np.array([float(rec[c]) for c in PROB_COLUMNS])
        s = float(p.sum())
        if np.any(p < 0.0) or np.any(p > 1.0) or s == 0.0:
            rejected += 1
            continue
        if abs(s - 1.0) > 1e-12:
            p = p / s
        out[(int(rec["cell_col"]), int(rec["cell_row"]))] = as_probs(p)
    return out, rejected
