"""Tree boosting (SAMME, optionally with random undersampling), bagging and
random-subspace ensembles.

Every ensemble's posterior is the (weighted) fraction of member votes.
"""
from __future__ import annotations

import math

import numpy as np

from .discriminant import Discriminant
from .knn import KNearestNeighbors
from .tree import DecisionTree

MAX_ALPHA = 50.0

_MEMBER_TYPES = {"tree": DecisionTree, "discriminant": Discriminant, "knn": KNearestNeighbors}


def _member_kind(m) -> str:
    for k, t in _MEMBER_TYPES.items():
        if isinstance(m, t):
            return k
    raise TypeError(type(m))


def _member_vote(m, X) -> np.ndarray:
    return np.argmax(m.posterior(X), axis=1)


def undersample(y, rng) -> np.ndarray:
    """Sorted indices keeping ``min class count`` random rows of every class."""
    classes, counts = np.unique(y, return_counts=True)
    m = counts.min()
    keep = [rng.choice(np.flatnonzero(y == c), size=m, replace=False) for c in classes]
    return np.sort(np.concatenate(keep))


class VoteEnsemble:
    """Members, their feature subsets and vote weights."""

    def __init__(self, n_classes: int):
        self.n_classes = n_classes
        self.members = []
        self.subsets = []
        self.weights = []

    def posterior(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        P = np.zeros((X.shape[0], self.n_classes))
        rows = np.arange(X.shape[0])
        for m, cols, w in zip(self.members, self.subsets, self.weights):
            P[rows, _member_vote(m, X[:, cols])] += w
        return P / P.sum(axis=1, keepdims=True)

    def to_dict(self) -> dict:
        return {"n_classes": self.n_classes, "weights": list(map(float, self.weights)),
                "subsets": [c.tolist() for c in self.subsets],
                "members": [{"member_type": _member_kind(m), **m.to_dict()} for m in self.members]}

    @classmethod
    def from_dict(cls, d: dict) -> "VoteEnsemble":
        e = cls(d["n_classes"])
        e.weights = list(d["weights"])
        e.subsets = [np.asarray(c, dtype=np.int64) for c in d["subsets"]]
        e.members = [_MEMBER_TYPES[m["member_type"]].from_dict(m) for m in d["members"]]
        return e


def fit_samme(X, y, n_classes, rounds=30, max_splits=20, rus=False, seed=0) -> VoteEnsemble:
    """SAMME boosting of Gini trees.

    With ``rus`` each round trains on a random undersample (every class cut
    to the minority size) while errors and reweighting use all rows.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    rng = np.random.default_rng(seed)
    k = len(np.unique(y))
    ens = VoteEnsemble(n_classes)
    all_cols = np.arange(X.shape[1])
    w = np.ones(len(y))
    for _ in range(rounds):
        tree = DecisionTree(n_classes, max_splits)
        if rus:
            idx = undersample(y, rng)
            tree.fit(X[idx], y[idx], w[idx])
        else:
            tree.fit(X, y, w)
        miss = tree.predict(X) != y
        err = w[miss].sum() / w.sum()
        if err >= 1.0 - 1.0 / k:
            if not ens.members:
                ens.members.append(tree)
                ens.subsets.append(all_cols)
                ens.weights.append(1.0)
            break
        alpha = MAX_ALPHA if err <= 0 else min(math.log((1 - err) / err) + math.log(k - 1), MAX_ALPHA)
        ens.members.append(tree)
        ens.subsets.append(all_cols)
        ens.weights.append(alpha)
        if err <= 0:
            break
        w = w * np.exp(alpha * miss)
        w /= w.mean()
    return ens


def fit_bagged_trees(X, y, n_classes, members=30, bootstrap=True, max_splits=None,
                     seed=0) -> VoteEnsemble:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    rng = np.random.default_rng(seed)
    n = len(y)
    ens = VoteEnsemble(n_classes)
    for _ in range(members):
        idx = np.sort(rng.integers(0, n, size=n)) if bootstrap else np.arange(n)
        ens.members.append(DecisionTree(n_classes, max_splits).fit(X[idx], y[idx]))
        ens.subsets.append(np.arange(X.shape[1]))
        ens.weights.append(1.0)
    return ens


def fit_subspace(X, y, n_classes, base="discriminant", members=30, dim=None, seed=0,
                 knn_k=10) -> VoteEnsemble:
    """Members trained on random feature subsets of size ``ceil(sqrt(d))``."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    rng = np.random.default_rng(seed)
    d = X.shape[1]
    dim = math.ceil(math.sqrt(d)) if dim is None else dim
    ens = VoteEnsemble(n_classes)
    for _ in range(members):
        cols = np.arange(d) if dim >= d else np.sort(rng.choice(d, size=dim, replace=False))
        if base == "discriminant":
            m = Discriminant(n_classes, "linear").fit(X[:, cols], y)
        elif base == "knn":
            m = KNearestNeighbors(n_classes, "euclidean", knn_k).fit(X[:, cols], y)
        else:
            raise ValueError(f"unknown subspace base learner {base!r}")
        ens.members.append(m)
        ens.subsets.append(cols)
        ens.weights.append(1.0)
    return ens
