"""Histogram-based gradient-boosted regression trees.

Squared-error boosting: each iteration fits a leaf-wise, gain-greedy
histogram tree to the residuals of the current model. Optional
gradient-based one-side sampling (keep the large-|gradient| fraction,
subsample and reweight the rest). Feature importance is the number of
internal nodes splitting on each feature, summed over trees.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np


@dataclass(frozen=True)
class GossParams:
    top_rate: float
    other_rate: float

    def __post_init__(self):
        if not (0.0 < self.top_rate + self.other_rate <= 1.0 + 1e-12):
            raise ValueError("top_rate + other_rate must lie in (0, 1]")
        if self.top_rate < 0 or self.other_rate < 0:
            raise ValueError("rates must be nonnegative")


@dataclass(frozen=True)
class GbmParams:
    num_iterations: int = 200
    learning_rate: float = 0.05
    num_leaves: int = 15
    min_samples_leaf: int = 5
    max_bins: int = 255
    goss: GossParams | None = None
    seed: int = 0

    def __post_init__(self):
        if self.num_iterations < 0:
            raise ValueError("num_iterations must be >= 0")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.num_leaves < 2:
            raise ValueError("num_leaves must be >= 2")


@dataclass
class TreeNode:
    feature: int = -1       # -1 marks a leaf
    bin: int = -1           # split goes left when binned value <= bin
    value: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.feature < 0


@dataclass
class GbmModel:
    base_score: float
    shrinkage: float
    bin_edges: list                      # per feature, np.ndarray of edges
    trees: list = field(default_factory=list)
    split_counts: np.ndarray = None

    @property
    def n_features(self) -> int:
        return len(self.bin_edges)


def quantile_bin_edges(x: np.ndarray, max_bins: int) -> np.ndarray:
    """Equal-frequency candidate edges, deduplicated; at most max_bins bins."""
    qs = np.linspace(0.0, 1.0, max_bins + 1)[1:-1]
    edges = np.unique(np.quantile(x, qs))
    return edges


def bin_matrix(X: np.ndarray, edges_per_feature) -> np.ndarray:
    binned = np.empty(X.shape, dtype=np.int64)
    for j, edges in enumerate(edges_per_feature):
        binned[:, j] = np.searchsorted(edges, X[:, j], side="left")
    return binned


def goss_sample(gradients: np.ndarray, top_rate: float, other_rate: float,
                seed: int = 0):
    """Keep the top `top_rate` fraction by |gradient|; uniformly sample
    `other_rate` of the rest with weight (1 - top_rate) / other_rate.

    Returns (sorted sample indices, per-sample weights)."""
    GossParams(top_rate, other_rate)
    g = np.asarray(gradients, dtype=float)
    n = len(g)
    n_top = int(round(top_rate * n))
    order = np.argsort(-np.abs(g), kind="stable")
    top = order[:n_top]
    rest = order[n_top:]
    n_other = int(round(other_rate * n))
    if n_other > 0 and len(rest) > 0:
        rng = np.random.default_rng(seed)
        sampled = rng.choice(rest, size=min(n_other, len(rest)), replace=False)
        w_other = (1.0 - top_rate) / other_rate
    else:
        sampled = np.empty(0, dtype=np.int64)
        w_other = 1.0
    indices = np.concatenate([top, sampled]).astype(np.int64)
    weights = np.concatenate([np.ones(len(top)), np.full(len(sampled), w_other)])
    order2 = np.argsort(indices, kind="stable")
    return indices[order2], weights[order2]


def _sorted_sum(values: np.ndarray) -> float:
    """Sum in value order so the result is independent of row order."""
    return float(np.sort(values, kind="stable").sum())


def _best_split(binned, grad, weights, idx, n_bins_per_feature, min_samples_leaf):
    """Best (gain, feature, bin) for one leaf, or None.

    Ties break toward the lowest feature index, then the lowest bin.
    Histogram accumulation is done in a canonical order so training is
    invariant under row permutation."""
    g = grad[idx] * weights[idx]
    w = weights[idx]
    total_g = _sorted_sum(g)
    total_w = _sorted_sum(w)
    total_n = len(idx)
    parent = total_g * total_g / total_w if total_w > 0 else 0.0
    best = None
    for f in range(binned.shape[1]):
        nb = n_bins_per_feature[f]
        if nb < 2:
            continue
        b = binned[idx, f]
        order = np.lexsort((w, g, b))
        hist_g = np.bincount(b[order], weights=g[order], minlength=nb)
        hist_w = np.bincount(b[order], weights=w[order], minlength=nb)
        hist_n = np.bincount(b, minlength=nb)
        cg = np.cumsum(hist_g)[:-1]
        cw = np.cumsum(hist_w)[:-1]
        cn = np.cumsum(hist_n)[:-1]
        ok = (cn >= min_samples_leaf) & ((total_n - cn) >= min_samples_leaf) & \
             (cw > 0) & ((total_w - cw) > 0)
        if not ok.any():
            continue
        gains = np.full(nb - 1, -np.inf)
        gains[ok] = cg[ok] ** 2 / cw[ok] + \
            (total_g - cg[ok]) ** 2 / (total_w - cw[ok]) - parent
        bi = int(np.argmax(gains))  # argmax takes the lowest bin on ties
        gain = gains[bi]
        if gain <= 1e-12:
            continue
        if best is None or gain > best[0] + 1e-12:
            best = (float(gain), f, bi)
    return best


def _grow_tree(binned, grad, weights, idx, params: GbmParams,
               n_bins_per_feature):
    """Leaf-wise, best-gain-first growth up to num_leaves."""
    root = TreeNode()
    leaves = [(root, idx)]
    candidates = [None] * 1
    candidates[0] = _best_split(binned, grad, weights, idx,
                                n_bins_per_feature, params.min_samples_leaf)
    split_counts = np.zeros(binned.shape[1], dtype=np.int64)
    while len(leaves) < params.num_leaves:
        best_leaf = -1
        best = None
        for li, cand in enumerate(candidates):
            if cand is None:
                continue
            if best is None or cand[0] > best[0] + 1e-12:
                best = cand
                best_leaf = li
        if best is None:
            break
        node, node_idx = leaves[best_leaf]
        _, f, b = best
        mask = binned[node_idx, f] <= b
        left_idx = node_idx[mask]
        right_idx = node_idx[~mask]
        node.feature = f
        node.bin = b
        node.left = TreeNode()
        node.right = TreeNode()
        split_counts[f] += 1
        leaves[best_leaf] = (node.left, left_idx)
        leaves.append((node.right, right_idx))
        candidates[best_leaf] = _best_split(binned, grad, weights, left_idx,
                                            n_bins_per_feature,
                                            params.min_samples_leaf)
        candidates.append(_best_split(binned, grad, weights, right_idx,
                                      n_bins_per_feature,
                                      params.min_samples_leaf))
    for node, node_idx in leaves:
        wsum = _sorted_sum(weights[node_idx])
        node.value = _sorted_sum(grad[node_idx] * weights[node_idx]) / wsum \
            if wsum > 0 else 0.0
    return root, split_counts


def _tree_predict(node: TreeNode, binned: np.ndarray) -> np.ndarray:
    out = np.empty(len(binned))
    stack = [(node, np.arange(len(binned)))]
    while stack:
        nd, idx = stack.pop()
        if nd.is_leaf:
            out[idx] = nd.value
            continue
        mask = binned[idx, nd.feature] <= nd.bin
        stack.append((nd.left, idx[mask]))
        stack.append((nd.right, idx[~mask]))
    return out


def fit(X: np.ndarray, y: np.ndarray, params: GbmParams | None = None) -> GbmModel:
    """Squared-error gradient boosting on a feature matrix."""
    params = params or GbmParams()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or len(X) != len(y):
        raise ValueError("X must be 2-D and aligned with y")
    if len(y) < 2:
        raise ValueError("need at least 2 rows")
    if not (np.isfinite(X).all() and np.isfinite(y).all()):
        raise ValueError("non-finite values in input")

    edges = [quantile_bin_edges(X[:, j], params.max_bins)
             for j in range(X.shape[1])]
    binned = bin_matrix(X, edges)
    n_bins = [len(e) + 1 for e in edges]
    model = GbmModel(base_score=_sorted_sum(y) / len(y), shrinkage=params.learning_rate,
                     bin_edges=edges,
                     split_counts=np.zeros(X.shape[1], dtype=np.int64))
    preds = np.full(len(y), model.base_score)
    all_idx = np.arange(len(y))
    unit_w = np.ones(len(y))
    for t in range(params.num_iterations):
        residual = y - preds
        if params.goss is not None:
            idx, w = goss_sample(residual, params.goss.top_rate,
                                 params.goss.other_rate, seed=params.seed + t)
            weights = np.zeros(len(y))
            weights[idx] = w
        else:
            idx, weights = all_idx, unit_w
        tree, counts = _grow_tree(binned, residual, weights, idx, params, n_bins)
        model.trees.append(tree)
        model.split_counts += counts
        preds += params.learning_rate * _tree_predict(tree, binned)
    return model


def predict(model: GbmModel, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise ValueError(f"expected {model.n_features} features, got "
                         f"{X.shape[1] if X.ndim == 2 else 'non-2D'}")
    binned = bin_matrix(X, model.bin_edges)
    out = np.full(len(X), model.base_score)
    for tree in model.trees:
        out += model.shrinkage * _tree_predict(tree, binned)
    return out


def feature_importance(model: GbmModel) -> np.ndarray:
    """Split counts per feature over the whole ensemble."""
    return model.split_counts.copy()


@dataclass
class Metrics:
    r2: float | None
    rmse: float
    mae: float


def metrics(y: np.ndarray, y_hat: np.ndarray) -> Metrics:
    y = np.asarray(y, dtype=float)
    y_hat = np.asarray(y_hat, dtype=float)
    if len(y) != len(y_hat) or len(y) < 2:
        raise ValueError("need two equal-length vectors of >= 2 values")
    err = y - y_hat
    rmse = float(np.sqrt(np.mean(err ** 2)))
    mae = float(np.mean(np.abs(err)))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = None if ss_tot == 0.0 else 1.0 - float(np.sum(err ** 2)) / ss_tot
    return Metrics(r2=r2, rmse=rmse, mae=mae)


def r2_level(r2: float | None) -> str:
    """Relationship strength bucket; negative values are reset to 0 and read
    as not relative."""
    if r2 is None or r2 <= 0.0:
        return "not relative"
    if r2 > 0.5:
        return "high"
    if r2 >= 0.25:
        return "medium"
    return "low"


def kfold_indices(n: int, k: int, seed: int = 0):
    """Seeded disjoint cover of range(n) into k folds, sizes differing <= 1."""
    if k < 2:
        raise ValueError("k must be >= 2")
    if n < k:
        raise ValueError("fewer rows than folds")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    return [np.sort(order[i::k]) for i in range(k)]


def cv_grid_search(X: np.ndarray, y: np.ndarray, grid, k: int = 5,
                   seed: int = 0):
    """Pick the grid candidate with the lowest mean validation RMSE.

    Ties keep the earliest candidate. Returns (best params,
    [(params, mean_rmse, [fold Metrics])])."""
    grid = list(grid)
    if not grid:
        raise ValueError("empty grid")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    folds = kfold_indices(len(y), k, seed)
    results = []
    best = None
    for cand in grid:
        fold_metrics = []
        for val_idx in folds:
            train_mask = np.ones(len(y), dtype=bool)
            train_mask[val_idx] = False
            model = fit(X[train_mask], y[train_mask], cand)
            fold_metrics.append(metrics(y[val_idx], predict(model, X[val_idx])))
        mean_rmse = float(np.mean([m.rmse for m in fold_metrics]))
        results.append((cand, mean_rmse, fold_metrics))
        if best is None or mean_rmse < best[1]:
            best = (cand, mean_rmse)
    return best[0], results


# -- checkpoint (versioned text format) -------------------------------------

MAGIC = "MGBM01"


def _write_node(node: TreeNode, lines: list) -> None:
    if node.is_leaf:
        lines.append(f"leaf {node.value!r}")
    else:
        lines.append(f"split {node.feature} {node.bin}")
        _write_node(node.left, lines)
        _write_node(node.right, lines)


def save_model(model: GbmModel, path) -> None:
    lines = [MAGIC,
             f"base_score {model.base_score!r}",
             f"shrinkage {model.shrinkage!r}",
             f"n_features {model.n_features}"]
    for edges in model.bin_edges:
        lines.append("edges " + " ".join(repr(float(e)) for e in edges))
    lines.append(f"n_trees {len(model.trees)}")
    for tree in model.trees:
        tree_lines: list = []
        _write_node(tree, tree_lines)
        lines.append(f"tree {len(tree_lines)}")
        lines.extend(tree_lines)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_model(path) -> GbmModel:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != MAGIC:
        raise ValueError("not a model checkpoint (bad magic)")
    pos = 1

    def take():
        nonlocal pos
        line = lines[pos]
        pos += 1
        return line

    base_score = float(take().split()[1])
    shrinkage = float(take().split()[1])
    n_features = int(take().split()[1])
    edges = []
    for _ in range(n_features):
        parts = take().split()
        assert parts[0] == "edges"
        edges.append(np.array([float(v) for v in parts[1:]]))
    n_trees = int(take().split()[1])
    model = GbmModel(base_score=base_score, shrinkage=shrinkage,
                     bin_edges=edges,
                     split_counts=np.zeros(n_features, dtype=np.int64))

    def read_node() -> TreeNode:
        parts = take().split()
        if parts[0] == "leaf":
            return TreeNode(value=float(parts[1]))
        node = TreeNode(feature=int(parts[1]), bin=int(parts[2]))
        node.left = read_node()
        node.right = read_node()
        model.split_counts[node.feature] += 1
        return node

    for _ in range(n_trees):
        take()  # "tree <n>"
        model.trees.append(read_node())
    return model
