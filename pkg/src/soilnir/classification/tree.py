"""Binary CART classification tree with Gini impurity and best-first growth."""
from __future__ import annotations

import heapq

import numpy as np


def _gini_weighted(counts, total):
    """total * gini = total - sum(counts^2) / total, safe for total == 0."""
    sq = (counts ** 2).sum(axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(total > 0, total - sq / np.where(total > 0, total, 1.0), 0.0)


class DecisionTree:
    """CART tree capped at ``max_splits`` internal nodes.

    Leaves are expanded best-first: the open leaf whose best split removes
    the most weighted Gini impurity is split next. Minimum leaf size is one
    sample. ``max_splits=None`` grows until every leaf is pure or
    unsplittable.
    """

    def __init__(self, n_classes: int, max_splits: int | None = None):
        self.n_classes = n_classes
        self.max_splits = max_splits
        self.feature = None
        self.threshold = None
        self.left = None
        self.right = None
        self.value = None

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.feature < 0))

    @property
    def n_splits(self) -> int:
        return int(np.sum(self.feature >= 0))

    def _best_split(self, X, order, onehot):
        """Best (feature, threshold, gain) for the samples listed in ``order``."""
        m, d = order.shape
        if m < 2:
            return None
        cols = np.arange(d)
        xs = X[order, cols]
        cum = np.cumsum(onehot[order], axis=0)
        total = cum[-1, 0]
        left = cum[:-1]
        right = total[None, None, :] - left
        wl = left.sum(axis=-1)
        wr = right.sum(axis=-1)
        imp = _gini_weighted(left, wl) + _gini_weighted(right, wr)
        valid = (xs[1:] > xs[:-1]) & (wl > 0) & (wr > 0)
        if not valid.any():
            return None
        imp = np.where(valid, imp, np.inf)
        flat = int(np.argmin(imp.T))
        f, pos = divmod(flat, m - 1)
        wtot = total.sum()
        gain = float(_gini_weighted(total, wtot) - imp[pos, f])
        if not gain > 1e-12 * wtot:
            return None
        lo, hi = xs[pos, f], xs[pos + 1, f]
        thr = 0.5 * (lo + hi)
        if not lo <= thr < hi:
            thr = lo
        return f, float(thr), gain

    def fit(self, X, y, sample_weight=None) -> "DecisionTree":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y)
        n, d = X.shape
        w = np.ones(n) if sample_weight is None else np.asarray(sample_weight, dtype=float)
        onehot = np.zeros((n, self.n_classes))
        onehot[np.arange(n), y] = w

        feature, threshold, left, right, value = [], [], [], [], []

        def new_node(rows):
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            value.append(onehot[rows].sum(axis=0))
            return len(feature) - 1

        root_order = np.argsort(X, axis=0, kind="stable")
        root = new_node(np.arange(n))
        heap = []
        counter = 0

        def push(node, order):
            nonlocal counter
            if np.count_nonzero(value[node]) < 2:
                return
            best = self._best_split(X, order, onehot)
            if best is not None:
                heapq.heappush(heap, (-best[2], counter, node, order, best))
                counter += 1

        push(root, root_order)
        splits = 0
        cap = np.inf if self.max_splits is None else self.max_splits
        while heap and splits < cap:
            _, _, node, order, (f, thr, _) = heapq.heappop(heap)
            rows = order[:, 0]
            go_left = np.zeros(n, dtype=bool)
            go_left[rows[X[rows, f] <= thr]] = True
            sel = go_left[order]
            m_left = int(sel[:, 0].sum())
            order_l = order.T[sel.T].reshape(order.shape[1], m_left).T
            order_r = order.T[~sel.T].reshape(order.shape[1], order.shape[0] - m_left).T
            ln = new_node(order_l[:, 0])
            rn = new_node(order_r[:, 0])
            feature[node], threshold[node] = f, thr
            left[node], right[node] = ln, rn
            splits += 1
            push(ln, order_l)
            push(rn, order_r)

        self.feature = np.array(feature, dtype=np.int64)
        self.threshold = np.array(threshold, dtype=float)
        self.left = np.array(left, dtype=np.int64)
        self.right = np.array(right, dtype=np.int64)
        self.value = np.array(value, dtype=float).reshape(-1, self.n_classes)
        return self

    def apply(self, X) -> np.ndarray:
        """Leaf index reached by every row."""
        X = np.asarray(X, dtype=float)
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = self.feature[node] >= 0
        while active.any():
            idx = np.flatnonzero(active)
            nd = node[idx]
            goes_left = X[idx, self.feature[nd]] <= self.threshold[nd]
            node[idx] = np.where(goes_left, self.left[nd], self.right[nd])
            active = self.feature[node] >= 0
        return node

    def posterior(self, X) -> np.ndarray:
        v = self.value[self.apply(X)]
        return v / v.sum(axis=1, keepdims=True)

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.posterior(X), axis=1)

    def to_dict(self) -> dict:
        return {"n_classes": self.n_classes, "max_splits": self.max_splits,
                "feature": self.feature.tolist(), "threshold": self.threshold.tolist(),
                "left": self.left.tolist(), "right": self.right.tolist(),
                "value": self.value.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "DecisionTree":
        t = cls(d["n_classes"], d["max_splits"])
        t.feature = np.asarray(d["feature"], dtype=np.int64)
        t.threshold = np.asarray(d["threshold"], dtype=float)
        t.left = np.asarray(d["left"], dtype=np.int64)
        t.right = np.asarray(d["right"], dtype=np.int64)
        t.value = np.asarray(d["value"], dtype=float).reshape(-1, t.n_classes)
        return t
