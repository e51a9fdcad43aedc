"""The 24 classifier configurations and cost-sensitive fit/predict.

Probabilistic families (trees, discriminants, kernel naive Bayes, KNN and
all ensembles) train without looking at the cost matrix and predict the
class of least expected cost under their posterior. SVMs take the costs
into training instead: each sample's box constraint is scaled by its
class's total misclassification cost (weights normalized to mean 1).
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .. import __version__
from .discriminant import Discriminant
from .ensemble import VoteEnsemble, fit_bagged_trees, fit_samme, fit_subspace
from .knn import METRICS, KNearestNeighbors
from .naive_bayes import KERNELS as NB_KERNELS
from .naive_bayes import KernelNaiveBayes
from .schemes import CostMatrix, expected_cost_decision
from .svm import KERNELS as SVM_KERNELS
from .svm import OneVsOneSVM
from .tree import DecisionTree

TREE = "tree"
DISCRIMINANT = "discriminant"
KERNEL_NB = "kernel_nb"
SVM = "svm"
KNN = "knn"
ENSEMBLE = "ensemble"

ENSEMBLES = ("boosted_trees", "bagged_trees", "subspace_discriminant", "subspace_knn",
             "rusboosted_trees")

VARIANTS = {
    TREE: (4, 20, 100),
    DISCRIMINANT: ("linear", "quadratic"),
    KERNEL_NB: NB_KERNELS,
    SVM: SVM_KERNELS,
    KNN: METRICS,
    ENSEMBLE: ENSEMBLES,
}

DEFAULTS = {
    KNN: {"k": 10},
    SVM: {"C": 1.0, "tol": 1e-3},
    ENSEMBLE: {"members": 30, "max_splits": 20, "seed": 0, "bootstrap": True, "dim": None, "k": 10},
}


@dataclass(frozen=True)
class ClassifierConfig:
    """One family/variant pair plus optional tuning parameters."""

    family: str
    variant: object
    params: dict = field(default_factory=dict, compare=True, hash=False)

    def __post_init__(self):
        if self.family not in VARIANTS:
            raise ValueError(f"unknown classifier family {self.family!r}")
        if self.variant not in VARIANTS[self.family]:
            raise ValueError(f"unknown {self.family} variant {self.variant!r}")

    @property
    def name(self) -> str:
        return f"{self.family}:{self.variant}"

    @property
    def probabilistic(self) -> bool:
        return self.family != SVM

    def param(self, key):
        return self.params.get(key, DEFAULTS.get(self.family, {}).get(key))

    @classmethod
    def parse(cls, name: str, params: dict | None = None) -> "ClassifierConfig":
        family, _, variant = name.partition(":")
        if family == TREE:
            variant = int(variant)
        return cls(family, variant, dict(params or {}))

    def to_dict(self) -> dict:
        return {"family": self.family, "variant": self.variant, "params": dict(self.params)}

    @classmethod
    def from_dict(cls, d: dict) -> "ClassifierConfig":
        return cls(d["family"], d["variant"], dict(d.get("params", {})))


def all_configs() -> list[ClassifierConfig]:
    """The 24 configurations, in a fixed order."""
    return [ClassifierConfig(f, v) for f, vs in VARIANTS.items() for v in vs]


_LOADERS = {
    "tree": DecisionTree.from_dict,
    "discriminant": Discriminant.from_dict,
    "kernel_nb": KernelNaiveBayes.from_dict,
    "knn": KNearestNeighbors.from_dict,
    "ensemble": VoteEnsemble.from_dict,
    "svm": OneVsOneSVM.from_dict,
}


@dataclass
class TrainedClassifier:
    config: ClassifierConfig
    cost: CostMatrix
    n_classes: int
    classes_present: np.ndarray
    n_features: int
    model: object

    def posterior(self, X) -> np.ndarray:
        """Class posterior (probabilistic families only); cost-independent."""
        if not self.config.probabilistic:
            raise TypeError(f"{self.config.name} has no posterior")
        return self.model.posterior(_check_dim(self, X))

    def to_dict(self) -> dict:
        return {"format": "soilnir.classifier", "toolkit_version": __version__,
                "config": self.config.to_dict(), "cost": self.cost.to_list(),
                "n_classes": self.n_classes, "classes_present": self.classes_present.tolist(),
                "n_features": self.n_features, "model": self.model.to_dict()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "TrainedClassifier":
        cfg = ClassifierConfig.from_dict(d["config"])
        return cls(cfg, CostMatrix(d["cost"]), d["n_classes"],
                   np.asarray(d["classes_present"], dtype=np.int64), d["n_features"],
                   _LOADERS[cfg.family](d["model"]))

    @classmethod
    def from_json(cls, text: str) -> "TrainedClassifier":
        return cls.from_dict(json.loads(text))


def _check_dim(model: TrainedClassifier, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != model.n_features:
        raise ValueError(f"classifier expects {model.n_features} features, got {X.shape[1]}")
    return X


def fit_classifier(config: ClassifierConfig, cost: CostMatrix, X, labels) -> TrainedClassifier:
    """Train one configuration; the class count is taken from ``cost``."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(labels)
    k = cost.k
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError(f"shape mismatch: X {X.shape}, labels {y.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("non-finite features")
    if y.size and (y.min() < 0 or y.max() >= k or not np.issubdtype(y.dtype, np.integer)):
        raise ValueError(f"labels must be class indices in [0, {k})")
    y = y.astype(np.int64)
    present = np.unique(y)
    if present.size < 2:
        raise ValueError("need at least two classes in the training labels")
    if present.size < k:
        missing = sorted(set(range(k)) - set(present.tolist()))
        warnings.warn(f"{config.name}: classes {missing} have no training samples and "
                      f"will never be predicted")

    fam, var = config.family, config.variant
    if fam == TREE:
        model = DecisionTree(k, int(var)).fit(X, y)
    elif fam == DISCRIMINANT:
        model = Discriminant(k, var).fit(X, y)
    elif fam == KERNEL_NB:
        model = KernelNaiveBayes(k, var).fit(X, y)
    elif fam == KNN:
        model = KNearestNeighbors(k, var, config.param("k")).fit(X, y)
    elif fam == SVM:
        model = OneVsOneSVM(k, var, config.param("C"), config.param("tol"))
        model.fit(X, y, cost.sample_weights(y))
    else:
        p = config.param
        if var == "boosted_trees":
            model = fit_samme(X, y, k, p("members"), p("max_splits"), False, p("seed"))
        elif var == "rusboosted_trees":
            model = fit_samme(X, y, k, p("members"), p("max_splits"), True, p("seed"))
        elif var == "bagged_trees":
            model = fit_bagged_trees(X, y, k, p("members"), p("bootstrap"),
                                     config.params.get("max_splits"), p("seed"))
        elif var == "subspace_discriminant":
            model = fit_subspace(X, y, k, "discriminant", p("members"), p("dim"), p("seed"))
        else:
            model = fit_subspace(X, y, k, "knn", p("members"), p("dim"), p("seed"), p("k"))
    return TrainedClassifier(config, cost, k, present, X.shape[1], model)


def decide(model: TrainedClassifier, posterior, cost: CostMatrix | None = None) -> np.ndarray:
    """Expected-cost decision on a precomputed posterior."""
    return expected_cost_decision(posterior, cost or model.cost, model.classes_present)


def predict_class(model: TrainedClassifier, X) -> np.ndarray:
    """Class indices for every row of X; ties go to the lower index."""
    X = _check_dim(model, X)
    if model.config.probabilistic:
        return decide(model, model.model.posterior(X))
    votes = model.model.votes(X)
    top = votes.max(axis=1, keepdims=True)
    tied = votes == top
    # vote ties: least expected cost under vote fractions, then lowest index
    ec = (votes / votes.sum(axis=1, keepdims=True)) @ model.cost.costs
    ec = np.where(tied, ec, np.inf)
    best = ec.min(axis=1, keepdims=True)
    return np.argmax(ec <= best + 1e-12 * np.maximum(np.abs(best), 1.0), axis=1)
