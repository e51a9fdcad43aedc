"""k-nearest-neighbour classifier over several distance metrics."""
from __future__ import annotations

import numpy as np
from scipy.spatial.distance import cdist

METRICS = ("cityblock", "chebyshev", "euclidean", "minkowski", "hamming", "jaccard")
MINKOWSKI_P = 3
BINARY_METRICS = ("hamming", "jaccard")


def distances(metric: str, A, B) -> np.ndarray:
    """Pairwise distances; hamming and jaccard compare features binarized at 0."""
    if metric not in METRICS:
        raise ValueError(f"unknown KNN metric {metric!r}")
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if metric in BINARY_METRICS:
        return cdist(A > 0, B > 0, metric=metric)
    if metric == "minkowski":
        return cdist(A, B, metric="minkowski", p=MINKOWSKI_P)
    return cdist(A, B, metric=metric)


class KNearestNeighbors:
    """Posterior = class fractions among the k nearest training rows.

    Equal distances are ordered by training-row index.
    """

    def __init__(self, n_classes: int, metric: str = "euclidean", k: int = 10):
        if metric not in METRICS:
            raise ValueError(f"unknown KNN metric {metric!r}")
        if k < 1:
            raise ValueError("k must be positive")
        self.n_classes = n_classes
        self.metric = metric
        self.k = k

    def fit(self, X, y) -> "KNearestNeighbors":
        self.X = np.asarray(X, dtype=float)
        self.y = np.asarray(y, dtype=np.int64)
        return self

    def posterior(self, X) -> np.ndarray:
        D = distances(self.metric, X, self.X)
        k = min(self.k, self.X.shape[0])
        nn = np.argsort(D, axis=1, kind="stable")[:, :k]
        P = np.zeros((D.shape[0], self.n_classes))
        np.add.at(P, (np.repeat(np.arange(D.shape[0]), k), self.y[nn].ravel()), 1.0)
        return P / k

    def to_dict(self) -> dict:
        return {"n_classes": self.n_classes, "metric": self.metric, "k": self.k,
                "X": self.X.tolist(), "y": self.y.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "KNearestNeighbors":
        m = cls(d["n_classes"], d["metric"], d["k"])
        y = np.asarray(d["y"], dtype=np.int64)
        return m.fit(np.asarray(d["X"], dtype=float).reshape(len(y), -1), y)
