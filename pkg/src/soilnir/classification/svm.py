"""Kernel SVM classifiers: weighted binary machines combined one-vs-one."""
from __future__ import annotations

from itertools import combinations

import numpy as np

from .._smo import solve_dual

KERNELS = ("linear", "quadratic", "cubic", "gaussian")


def gram(kind: str, A, B) -> np.ndarray:
    """Kernel matrix between the rows of A and B.

    Polynomial kernels are ``(a.b + 1)^d``; the gaussian kernel divides
    squared distances by the number of features.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if kind == "linear":
        return A @ B.T
    if kind == "quadratic":
        return (A @ B.T + 1.0) ** 2
    if kind == "cubic":
        return (A @ B.T + 1.0) ** 3
    if kind == "gaussian":
        sq = (A ** 2).sum(1)[:, None] + (B ** 2).sum(1)[None, :] - 2.0 * A @ B.T
        return np.exp(-np.maximum(sq, 0.0) / A.shape[1])
    raise ValueError(f"unknown SVM kernel {kind!r}")


class BinarySVM:
    """Soft-margin SVM; ``C`` may differ per sample."""

    def __init__(self, kernel: str = "linear", tol: float = 1e-3):
        self.kernel = kernel
        self.tol = tol

    def fit(self, X, y_pm, C) -> "BinarySVM":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y_pm, dtype=float)
        n = X.shape[0]
        C = np.broadcast_to(np.asarray(C, dtype=float), (n,))
        K = gram(self.kernel, X, X)
        beta, rho, self.iterations = solve_dual(K, np.arange(n), y, -np.ones(n), C, self.tol)
        sv = beta > 0
        self.support_vectors = X[sv]
        self.dual_coef = (y * beta)[sv]
        self.rho = float(rho)
        return self

    def decision_function(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if self.support_vectors.shape[0] == 0:
            return np.full(X.shape[0], -self.rho)
        return gram(self.kernel, X, self.support_vectors) @ self.dual_coef - self.rho

    def to_dict(self) -> dict:
        return {"kernel": self.kernel, "tol": self.tol, "rho": self.rho,
                "support_vectors": self.support_vectors.tolist(),
                "dual_coef": self.dual_coef.tolist()}

    @classmethod
    def from_dict(cls, d: dict, n_features: int) -> "BinarySVM":
        m = cls(d["kernel"], d["tol"])
        m.rho = float(d["rho"])
        m.support_vectors = np.asarray(d["support_vectors"], dtype=float).reshape(-1, n_features)
        m.dual_coef = np.asarray(d["dual_coef"], dtype=float)
        return m


class OneVsOneSVM:
    """One binary machine per pair of training classes; majority vote.

    ``pair (a, b)`` with a < b votes for a when its decision value is >= 0.
    """

    def __init__(self, n_classes: int, kernel: str = "linear", C: float = 1.0, tol: float = 1e-3):
        if kernel not in KERNELS:
            raise ValueError(f"unknown SVM kernel {kernel!r}")
        self.n_classes = n_classes
        self.kernel = kernel
        self.C = C
        self.tol = tol

    def fit(self, X, y, sample_weight=None) -> "OneVsOneSVM":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y)
        self.n_features = X.shape[1]
        w = np.ones(len(y)) if sample_weight is None else np.asarray(sample_weight, dtype=float)
        self.classes = np.unique(y)
        self.pairs = list(combinations(self.classes.tolist(), 2))
        self.machines = []
        for a, b in self.pairs:
            idx = np.flatnonzero((y == a) | (y == b))
            ypm = np.where(y[idx] == a, 1.0, -1.0)
            self.machines.append(BinarySVM(self.kernel, self.tol).fit(X[idx], ypm, self.C * w[idx]))
        return self

    def votes(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        v = np.zeros((X.shape[0], self.n_classes))
        for (a, b), m in zip(self.pairs, self.machines):
            pos = m.decision_function(X) >= 0
            v[pos, a] += 1
            v[~pos, b] += 1
        return v

    def to_dict(self) -> dict:
        return {"n_classes": self.n_classes, "kernel": self.kernel, "C": self.C, "tol": self.tol,
                "n_features": self.n_features, "classes": self.classes.tolist(),
                "pairs": [list(p) for p in self.pairs],
                "machines": [m.to_dict() for m in self.machines]}

    @classmethod
    def from_dict(cls, d: dict) -> "OneVsOneSVM":
        m = cls(d["n_classes"], d["kernel"], d["C"], d["tol"])
        m.n_features = d["n_features"]
        m.classes = np.asarray(d["classes"], dtype=np.int64)
        m.pairs = [tuple(p) for p in d["pairs"]]
        m.machines = [BinarySVM.from_dict(x, m.n_features) for x in d["machines"]]
        return m
