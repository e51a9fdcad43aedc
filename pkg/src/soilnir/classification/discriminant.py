"""Gaussian linear (pooled covariance) and quadratic discriminant analysis."""
from __future__ import annotations

import numpy as np

RIDGE = 1e-6
RCOND = 1e-10


def _factor(cov):
    """Eigen-factor a covariance; lift the spectrum when ill-conditioned."""
    d = cov.shape[0]
    vals, vecs = np.linalg.eigh(cov)
    top = vals.max() if d else 0.0
    if top <= 0 or vals.min() <= RCOND * top:
        tr = np.trace(cov) / d
        vals = np.maximum(vals, 0.0) + RIDGE * (tr if tr > 0 else 1.0)
    return vals, vecs


def _log_gauss(X, mean, vals, vecs):
    z = (X - mean) @ vecs / np.sqrt(vals)
    return -0.5 * (z ** 2).sum(axis=1) - 0.5 * np.log(vals).sum()


class Discriminant:
    """LDA (``kind="linear"``) or QDA (``kind="quadratic"``).

    Priors are the empirical class frequencies. Classes absent from the
    training labels get zero posterior.
    """

    def __init__(self, n_classes: int, kind: str = "linear"):
        if kind not in ("linear", "quadratic"):
            raise ValueError(f"unknown discriminant kind {kind!r}")
        self.n_classes = n_classes
        self.kind = kind

    def fit(self, X, y) -> "Discriminant":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y)
        self.classes = np.unique(y)
        n = X.shape[0]
        self.priors = np.array([np.mean(y == c) for c in self.classes])
        self.means = np.array([X[y == c].mean(axis=0) for c in self.classes])
        if self.kind == "linear":
            resid = X - self.means[np.searchsorted(self.classes, y)]
            dof = n - len(self.classes)
            cov = resid.T @ resid / (dof if dof > 0 else n)
            self.factors = [_factor(cov)]
        else:
            self.factors = []
            for c in self.classes:
                Xc = X[y == c]
                m = Xc.shape[0]
                r = Xc - Xc.mean(axis=0)
                self.factors.append(_factor(r.T @ r / (m - 1 if m > 1 else 1)))
        return self

    def log_joint(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        out = np.full((X.shape[0], self.n_classes), -np.inf)
        for i, c in enumerate(self.classes):
            vals, vecs = self.factors[0 if self.kind == "linear" else i]
            out[:, c] = _log_gauss(X, self.means[i], vals, vecs) + np.log(self.priors[i])
        return out

    def posterior(self, X) -> np.ndarray:
        lj = self.log_joint(X)
        lj -= lj.max(axis=1, keepdims=True)
        p = np.exp(lj)
        return p / p.sum(axis=1, keepdims=True)

    def to_dict(self) -> dict:
        return {"n_classes": self.n_classes, "kind": self.kind,
                "classes": self.classes.tolist(), "priors": self.priors.tolist(),
                "means": self.means.tolist(),
                "factors": [{"values": v.tolist(), "vectors": V.tolist()} for v, V in self.factors]}

    @classmethod
    def from_dict(cls, d: dict) -> "Discriminant":
        m = cls(d["n_classes"], d["kind"])
        m.classes = np.asarray(d["classes"], dtype=np.int64)
        m.priors = np.asarray(d["priors"], dtype=float)
        m.means = np.asarray(d["means"], dtype=float)
        m.factors = [(np.asarray(f["values"], dtype=float), np.asarray(f["vectors"], dtype=float))
                     for f in d["factors"]]
        return m
