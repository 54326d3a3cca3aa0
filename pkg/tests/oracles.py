"""Independent brute-force oracles used by the unit and acceptance tests.

These deliberately avoid the library's vectorized implementations: plain
Python loops only, so agreement is meaningful.
"""
import math

import numpy as np


def conv2d_loops(x, w, b, stride=1, pad=1):
    """Naive convolution. x: (N,C,H,W), w: (F,C,k,k), b: (F,)."""
    n, c, h, ww = x.shape
    f, _, k, _ = w.shape
    xp = np.zeros((n, c, h + 2 * pad, ww + 2 * pad))
    xp[:, :, pad:pad + h, pad:pad + ww] = x
    ho = (h + 2 * pad - k) // stride + 1
    wo = (ww + 2 * pad - k) // stride + 1
    out = np.zeros((n, f, ho, wo))
    for ni in range(n):
        for fi in range(f):
            for i in range(ho):
                for j in range(wo):
                    acc = b[fi]
                    for ci in range(c):
                        for di in range(k):
                            for dj in range(k):
                                acc += (w[fi, ci, di, dj] *
                                        xp[ni, ci, i * stride + di, j * stride + dj])
                    out[ni, fi, i, j] = acc
    return out


def avgpool2_loops(x):
    n, c, h, w = x.shape
    out = np.zeros((n, c, h // 2, w // 2))
    for ni in range(n):
        for ci in range(c):
            for i in range(h // 2):
                for j in range(w // 2):
                    out[ni, ci, i, j] = (x[ni, ci, 2 * i, 2 * j] +
                                         x[ni, ci, 2 * i + 1, 2 * j] +
                                         x[ni, ci, 2 * i, 2 * j + 1] +
                                         x[ni, ci, 2 * i + 1, 2 * j + 1]) / 4.0
    return out


def _conv_weights(layer):
    c_out = layer.w.shape[0]
    c_in = layer.w.shape[1] // (layer.k * layer.k)
    return layer.w.reshape(c_out, c_in, layer.k, layer.k)


def cnn_forward_loops(model, x):
    """Forward pass of a CnnModel via the loop primitives above."""
    h = conv2d_loops(x, _conv_weights(model.stem), model.stem.b,
                     stride=model.stem.stride, pad=model.stem.pad)
    h = np.maximum(h, 0.0)
    h = avgpool2_loops(h)
    for blk in model.blocks:
        inner = conv2d_loops(h, _conv_weights(blk.conv1), blk.conv1.b,
                             stride=1, pad=1)
        inner = np.maximum(inner, 0.0)
        inner = conv2d_loops(inner, _conv_weights(blk.conv2), blk.conv2.b,
                             stride=1, pad=1)
        h = avgpool2_loops(h + inner)
    pooled = h.mean(axis=(2, 3))
    logits = pooled @ model.head.w.T + model.head.b
    out = np.zeros_like(logits)
    for i in range(len(logits)):
        m = max(logits[i])
        e = [math.exp(v - m) for v in logits[i]]
        s = sum(e)
        out[i] = [v / s for v in e]
    return out


def tree_predict_loops(model, X):
    """Row-at-a-time GBM prediction by walking each tree with an explicit loop."""
    from morphogrid.gbm import bin_matrix
    binned = bin_matrix(np.asarray(X, dtype=float), model.bin_edges)
    out = []
    for row in binned:
        total = model.base_score
        for tree in model.trees:
            node = tree
            while not node.is_leaf:
                if row[node.feature] <= node.bin:
                    node = node.left
                else:
                    node = node.right
            total += model.shrinkage * node.value
        out.append(total)
    return np.array(out)


def sort_stats_loops(values):
    """(mean, lower-middle median, population std) by sorting and summing."""
    vals = sorted(values)
    n = len(vals)
    mean = sum(vals) / n
    median = vals[(n - 1) // 2]
    var = sum((v - mean) ** 2 for v in vals) / n
    return mean, median, math.sqrt(var)
