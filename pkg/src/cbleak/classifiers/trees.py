"""Level-wise exact-split decision tree growth.

One grower serves both the Gini forest and the Newton-boosted ensemble.
Each feature column is sorted once per fit; a level of the tree is grown by
a single scan of every sorted column that keeps running left-hand sums per
open node, so every candidate threshold of every node is scored without
re-sorting.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit


@dataclass
class Tree:
    feature: np.ndarray    # int64, -1 marks a leaf
    threshold: np.ndarray  # rows with x[feature] < threshold go left
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray      # (n_nodes, n_outputs)

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):
            if self.feature[i] >= 0:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def apply(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        while True:
            feat = self.feature[node]
            active = np.flatnonzero(feat >= 0)
            if active.size == 0:
                return node
            n_a = node[active]
            go_left = X[rows[active], feat[active]] < self.threshold[n_a]
            node[active] = np.where(go_left, self.left[n_a], self.right[n_a])

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]


@njit(cache=True)
def _midpoint(lo, hi):
    mid = lo + (hi - lo) / 2.0
    if not (lo < mid and mid <= hi):
        mid = hi
    return mid


@njit(cache=True)
def _scan_newton(order, xs, node_of_row, n_nodes, g, h, G, H, lam, min_child, fmask):
    best_gain = np.full(n_nodes, -np.inf)
    best_feat = np.full(n_nodes, -1, dtype=np.int64)
    best_thr = np.zeros(n_nodes)
    parent = G * G / (H + lam)
    d, n = order.shape
    gl = np.zeros(n_nodes)
    hl = np.zeros(n_nodes)
    last = np.zeros(n_nodes)
    seen = np.zeros(n_nodes, dtype=np.bool_)
    for f in range(d):
        gl[:] = 0.0
        hl[:] = 0.0
        seen[:] = False
        for i in range(n):
            r = order[f, i]
            q = node_of_row[r]
            if q < 0 or not fmask[q, f]:
                continue
            x = xs[f, i]
            if seen[q] and x > last[q]:
                hr = H[q] - hl[q]
                if hl[q] >= min_child and hr >= min_child:
                    gr = G[q] - gl[q]
                    gain = gl[q] * gl[q] / (hl[q] + lam) + gr * gr / (hr + lam) - parent[q]
                    if gain > best_gain[q]:
                        best_gain[q] = gain
                        best_feat[q] = f
                        best_thr[q] = _midpoint(last[q], x)
            gl[q] += g[r]
            hl[q] += h[r]
            last[q] = x
            seen[q] = True
    return best_gain, best_feat, best_thr


@njit(cache=True)
def _scan_gini(order, xs, node_of_row, n_nodes, w, totals, fmask):
    best_gain = np.full(n_nodes, -np.inf)
    best_feat = np.full(n_nodes, -1, dtype=np.int64)
    best_thr = np.zeros(n_nodes)
    J = w.shape[1]
    N = np.zeros(n_nodes)
    parent = np.zeros(n_nodes)
    for q in range(n_nodes):
        s = 0.0
        sq = 0.0
        for c in range(J):
            s += totals[q, c]
            sq += totals[q, c] * totals[q, c]
        N[q] = s
        parent[q] = sq / s if s > 0 else 0.0
    d, n = order.shape
    cl = np.zeros((n_nodes, J))
    nl = np.zeros(n_nodes)
    last = np.zeros(n_nodes)
    seen = np.zeros(n_nodes, dtype=np.bool_)
    for f in range(d):
        cl[:, :] = 0.0
        nl[:] = 0.0
        seen[:] = False
        for i in range(n):
            r = order[f, i]
            q = node_of_row[r]
            if q < 0 or not fmask[q, f]:
                continue
            x = xs[f, i]
            if seen[q] and x > last[q]:
                nr = N[q] - nl[q]
                sl = 0.0
                sr = 0.0
                for c in range(J):
                    a = cl[q, c]
                    b = totals[q, c] - a
                    sl += a * a
                    sr += b * b
                gain = sl / nl[q] + sr / nr - parent[q]
                if gain > best_gain[q]:
                    best_gain[q] = gain
                    best_feat[q] = f
                    best_thr[q] = _midpoint(last[q], x)
            for c in range(J):
                cl[q, c] += w[r, c]
            nl[q] += w[r].sum()
            last[q] = x
            seen[q] = True
    return best_gain, best_feat, best_thr


class GiniCriterion:
    """Per-row stats are bootstrap-weighted one-hot class counts, shape (n, J)."""

    def __init__(self, n_classes: int):
        self.n_classes = n_classes

    def node_totals(self, stats, node_of_row, n_nodes):
        totals = np.zeros((n_nodes, stats.shape[1]))
        live = node_of_row >= 0
        np.add.at(totals, node_of_row[live], stats[live])
        return totals

    def scan(self, order, xs, node_of_row, stats, totals, fmask):
        return _scan_gini(order, xs, node_of_row, len(totals), stats, totals, fmask)

    def should_split(self, best_gain, totals):
        impure = totals.max(axis=1) < totals.sum(axis=1)
        return impure & np.isfinite(best_gain)

    def leaf(self, totals):
        return totals / totals.sum(axis=1, keepdims=True)


class NewtonCriterion:
    """Per-row stats are (gradient, hessian) columns, shape (n, 2)."""

    def __init__(self, reg_lambda: float = 1.0, min_child_weight: float = 1.0,
                 learning_rate: float = 0.3, min_gain: float = 1e-9):
        self.reg_lambda = reg_lambda
        self.min_child_weight = min_child_weight
        self.learning_rate = learning_rate
        self.min_gain = min_gain

    def node_totals(self, stats, node_of_row, n_nodes):
        live = node_of_row >= 0
        return np.stack([np.bincount(node_of_row[live], stats[live, j], minlength=n_nodes)
                         for j in range(2)], axis=1)

    def scan(self, order, xs, node_of_row, stats, totals, fmask):
        return _scan_newton(order, xs, node_of_row, len(totals),
                            np.ascontiguousarray(stats[:, 0]), np.ascontiguousarray(stats[:, 1]),
                            totals[:, 0].copy(), totals[:, 1].copy(),
                            self.reg_lambda, self.min_child_weight, fmask)

    def should_split(self, best_gain, totals):
        return np.isfinite(best_gain) & (best_gain > self.min_gain)

    def leaf(self, totals):
        g, h = totals[:, 0], totals[:, 1]
        return (-self.learning_rate * g / (h + self.reg_lambda))[:, None]


@dataclass
class SortedColumns:
    """Row indices sorted per feature, feature-major: ``order[f]`` sorts ``X[:, f]``."""

    order: np.ndarray
    values: np.ndarray

    @classmethod
    def build(cls, X: np.ndarray) -> "SortedColumns":
        order = np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T)
        values = np.ascontiguousarray(np.take_along_axis(X.T, order, axis=1))
        return cls(order, values)


def grow_tree(X: np.ndarray, cols: SortedColumns, stats: np.ndarray, criterion, *,
              active: np.ndarray | None = None, max_depth: int | None = None,
              max_features: int | None = None,
              rng: np.random.Generator | None = None) -> Tree:
    """Grow one tree.

    Parameters
    ----------
    X : ndarray, shape (n, d)
    cols : SortedColumns
        Presorted columns of ``X``.
    stats : ndarray, shape (n, s)
        Additive per-row statistics understood by ``criterion``.
    active : bool ndarray, shape (n,), optional
        Rows taking part in this tree (default: all).
    max_features : int, optional
        Features drawn without replacement per node. Nodes whose draw offers
        no admissible split retry with every feature.
    """
    n, d = X.shape
    node_of_row = np.zeros(n, dtype=np.int64)
    if active is not None:
        node_of_row[~active] = -1
    feature, threshold, left, right, values = [], [], [], [], []

    def new_nodes(count):
        first = len(feature)
        feature.extend([-1] * count)
        threshold.extend([np.nan] * count)
        left.extend([-1] * count)
        right.extend([-1] * count)
        values.extend([None] * count)
        return np.arange(first, first + count)

    open_nodes = new_nodes(1)
    depth = 0
    while len(open_nodes):
        q = len(open_nodes)
        totals = criterion.node_totals(stats, node_of_row, q)
        leaf_vals = criterion.leaf(totals)
        if max_depth is not None and depth >= max_depth:
            split = np.zeros(q, dtype=bool)
        else:
            if max_features is not None and max_features < d:
                keys = rng.random((q, d))
                kth = np.partition(keys, max_features - 1, axis=1)[:, max_features - 1]
                fmask = keys <= kth[:, None]
            else:
                fmask = np.ones((q, d), dtype=np.bool_)
            gain, feat, thr = criterion.scan(cols.order, cols.values, node_of_row, stats,
                                             totals, fmask)
            retry = ~np.isfinite(gain) & ~fmask.all(axis=1)
            if retry.any():
                g2, f2, t2 = criterion.scan(cols.order, cols.values, node_of_row, stats, totals,
                                            np.ones((q, d), dtype=np.bool_))
                gain = np.where(retry, g2, gain)
                feat = np.where(retry, f2, feat)
                thr = np.where(retry, t2, thr)
            split = criterion.should_split(gain, totals)

        for j in range(q):
            values[open_nodes[j]] = leaf_vals[j]
        split_idx = np.flatnonzero(split)
        if split_idx.size == 0:
            break
        children = new_nodes(2 * split_idx.size)
        rank = np.full(q, -1, dtype=np.int64)
        rank[split_idx] = np.arange(split_idx.size)
        for r, j in enumerate(split_idx):
            node = open_nodes[j]
            feature[node] = int(feat[j])
            threshold[node] = float(thr[j])
            left[node], right[node] = children[2 * r], children[2 * r + 1]

        live = np.flatnonzero(node_of_row >= 0)
        seg = node_of_row[live]
        new_rank = rank[seg]
        moving = new_rank >= 0
        rows, seg, new_rank = live[moving], seg[moving], new_rank[moving]
        goes_right = ~(X[rows, feat[seg]] < thr[seg])
        node_of_row[live[~moving]] = -1
        node_of_row[rows] = 2 * new_rank + goes_right
        open_nodes = children
        depth += 1

    out_dim = len(values[0])
    vals = np.array([v if v is not None else np.zeros(out_dim) for v in values])
    return Tree(np.array(feature, dtype=np.int64), np.array(threshold),
                np.array(left, dtype=np.int64), np.array(right, dtype=np.int64), vals)
