"""Weighted CART trees on sparse feature matrices.

One builder serves every tree-based model: Gini impurity for classification
(decision tree, forest, AdaBoost stumps) and squared error for the
gradient-boosting regression trees.  Leaf values are a ratio of per-sample
sums, ``sum(num) / sum(den)``, so callers can plug in class fractions,
means, or Newton steps without touching the split search.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

GINI = "gini"
MSE = "mse"

# columns scored per block; bounds memory on wide vocabularies
_BLOCK = 2048
_MIN_GAIN = 1e-12


@dataclass
class Tree:
    feature: np.ndarray    # -1 marks a leaf
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return int(self.feature.size)

    @property
    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):
            if self.feature[i] >= 0:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def apply(self, X: sp.csr_matrix) -> np.ndarray:
        """Index of the leaf each row lands in."""
        n = X.shape[0]
        node = np.zeros(n, dtype=np.int64)
        active = np.flatnonzero(self.feature[node] >= 0)
        while active.size:
            feats = self.feature[node[active]]
            vals = np.asarray(X[active, feats]).ravel()
            go_left = vals <= self.threshold[node[active]]
            node[active] = np.where(go_left, self.left[node[active]], self.right[node[active]])
            active = active[self.feature[node[active]] >= 0]
        return node

    def predict_value(self, X: sp.csr_matrix) -> np.ndarray:
        return self.value[self.apply(X)]

    def to_state(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_state(cls, state: dict) -> "Tree":
        return cls(
            np.asarray(state["feature"], dtype=np.int64),
            np.asarray(state["threshold"], dtype=np.float64),
            np.asarray(state["left"], dtype=np.int64),
            np.asarray(state["right"], dtype=np.int64),
            np.asarray(state["value"], dtype=np.float64),
        )


def _impurity(criterion, w, yw, yyw):
    """Weighted impurity mass (impurity times node weight); arrays allowed."""
    with np.errstate(divide="ignore", invalid="ignore"):
        if criterion == GINI:
            out = 2.0 * yw * (w - yw) / w
        else:
            out = yyw - yw * yw / w
    return np.where(w > 0, out, 0.0)


def _best_split(Xn, cands, w, y, criterion, min_leaf):
    """Best (children impurity, feature, threshold) over candidate columns.

    Ties resolve to the lowest feature index, then the lowest threshold.
    """
    n = Xn.shape[0]
    best = (np.inf, -1, 0.0)
    if n < 2 * min_leaf:
        return best
    pos = np.arange(1, n)  # left-child size for a split after sorted position i
    size_ok = (pos >= min_leaf) & (n - pos >= min_leaf)
    wy, wyy = w * y, w * y * y
    W, WY, WYY = w.sum(), wy.sum(), wyy.sum()
    for start in range(0, cands.size, _BLOCK):
        cols = cands[start:start + _BLOCK]
        dense = Xn[:, cols].toarray()
        order = np.argsort(dense, axis=0, kind="stable")
        vals = np.take_along_axis(dense, order, axis=0)
        cw = np.cumsum(w[order], axis=0)[:-1]
        cy = np.cumsum(wy[order], axis=0)[:-1]
        cyy = np.cumsum(wyy[order], axis=0)[:-1] if criterion == MSE else 0.0
        child = _impurity(criterion, cw, cy, cyy) + _impurity(criterion, W - cw, WY - cy, WYY - cyy)
        valid = (vals[:-1] < vals[1:]) & size_ok[:, None]
        child = np.where(valid, child, np.inf)
        # feature-major scan so the first minimum has the lowest feature index
        flat = child.T.ravel()
        m = flat.min()
        if not np.isfinite(m):
            continue
        tol = 1e-12 * max(1.0, abs(m))
        if m < best[0] - tol:
            k = int(np.flatnonzero(flat <= m + tol)[0])
            j, i = divmod(k, n - 1)
            best = (float(m), int(cols[j]), float((vals[i, j] + vals[i + 1, j]) / 2.0))
    return best


def build_tree(
    X: sp.csr_matrix,
    target: np.ndarray,
    weights: np.ndarray | None = None,
    *,
    criterion: str = GINI,
    max_depth: int = 32,
    min_samples_leaf: int = 1,
    max_features: int | None = None,
    rng: np.random.Generator | None = None,
    leaf_num: np.ndarray | None = None,
    leaf_den: np.ndarray | None = None,
) -> Tree:
    X = sp.csr_matrix(X)
    n, d = X.shape
    y = np.asarray(target, dtype=np.float64)
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=np.float64)
    num = w * y if leaf_num is None else np.asarray(leaf_num, dtype=np.float64)
    den = w if leaf_den is None else np.asarray(leaf_den, dtype=np.float64)
    if max_features is not None and rng is None:
        raise ValueError("feature subsampling needs an rng")

    feature, threshold, left, right, value = [], [], [], [], []

    def new_node(rows):
        s = den[rows].sum()
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(float(num[rows].sum() / s) if s != 0 else 0.0)
        return len(feature) - 1

    root_rows = np.flatnonzero(w > 0)
    stack = [(new_node(root_rows), root_rows, 0)]
    while stack:
        node, rows, depth = stack.pop()
        if depth >= max_depth or rows.size < 2 * min_samples_leaf:
            continue
        wr, yr = w[rows], y[rows]
        parent = float(_impurity(criterion, wr.sum(), (wr * yr).sum(), (wr * yr * yr).sum()))
        if parent <= _MIN_GAIN:
            continue
        Xn = X[rows]
        # all-zero columns cannot split the node
        Xn.eliminate_zeros()
        cands = np.unique(Xn.indices)
        if max_features is not None and cands.size > max_features:
            cands = np.sort(rng.choice(cands, size=max_features, replace=False))
        score, f, thr = _best_split(Xn, cands, wr, yr, criterion, min_samples_leaf)
        # zero-gain splits are allowed on impure nodes (XOR needs one at the root)
        if f < 0:
            continue
        go_left = np.asarray(Xn[:, f].todense()).ravel() <= thr
        lrows, rrows = rows[go_left], rows[~go_left]
        li, ri = new_node(lrows), new_node(rrows)
        feature[node], threshold[node], left[node], right[node] = f, thr, li, ri
        stack.append((ri, rrows, depth + 1))
        stack.append((li, lrows, depth + 1))

    return Tree(
        np.asarray(feature, dtype=np.int64),
        np.asarray(threshold, dtype=np.float64),
        np.asarray(left, dtype=np.int64),
        np.asarray(right, dtype=np.int64),
        np.asarray(value, dtype=np.float64),
    )
