"""Metrics, cross-validation, the misclassification-cost grid search and the
regressor comparison report."""
from __future__ import annotations

import hashlib
import itertools
import json
import logging
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from joblib import Parallel, delayed

from .classification import (
    ClassifierConfig,
    CostMatrix,
    decide,
    fit_classifier,
    off_diagonal_cells,
    predict_class,
)
from .regression import LASSO, LR_BF, OLS, PLSR, SVR, fit_regressor, kfold_indices, predict

log = logging.getLogger(__name__)

GATE_RHO = 0.6


def _nan_to_none(x):
    if isinstance(x, dict):
        return {k: _nan_to_none(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_nan_to_none(v) for v in x]
    if isinstance(x, np.ndarray):
        return _nan_to_none(x.tolist())
    if isinstance(x, (float, np.floating)):
        return None if not math.isfinite(x) else float(x)
    if isinstance(x, np.integer):
        return int(x)
    return x


# ------------------------------------------------------------ regression

@dataclass(frozen=True)
class RegressionMetrics:
    """Pearson rho, R^2 and MSE; NaN marks an undefined value."""

    pearson_rho: float
    r_squared: float
    mse: float

    def to_dict(self) -> dict:
        return _nan_to_none({"pearson_rho": self.pearson_rho, "r_squared": self.r_squared,
                             "mse": self.mse})


def regression_metrics(y_true, y_pred) -> RegressionMetrics:
    t = np.asarray(y_true, dtype=float)
    p = np.asarray(y_pred, dtype=float)
    if t.shape != p.shape or t.ndim != 1:
        raise ValueError(f"shape mismatch: {t.shape} vs {p.shape}")
    if t.size < 2:
        raise ValueError("need at least 2 values")
    resid = t - p
    mse = float(np.mean(resid ** 2))
    tc = t - t.mean()
    pc = p - p.mean()
    ss_tot = float(tc @ tc)
    den = math.sqrt(ss_tot * float(pc @ pc))
    rho = float(np.clip((tc @ pc) / den, -1.0, 1.0)) if den > 0 else math.nan
    r2 = 1.0 - float(resid @ resid) / ss_tot if ss_tot > 0 else math.nan
    return RegressionMetrics(rho, r2, mse)


@dataclass
class RegressionCV:
    kind: str
    folds: list[RegressionMetrics]
    fold_sizes: list[int]

    def _stat(self, name):
        v = np.array([getattr(m, name) for m in self.folds], dtype=float)
        v = v[np.isfinite(v)]
        if v.size == 0:
            return math.nan, math.nan
        return float(np.median(v)), float(v.std(ddof=1)) if v.size > 1 else 0.0

    @property
    def median_rho(self) -> float:
        return self._stat("pearson_rho")[0]

    def summary(self) -> dict:
        out = {"kind": self.kind, "fold_sizes": self.fold_sizes,
               "folds": [m.to_dict() for m in self.folds]}
        for name in ("pearson_rho", "r_squared", "mse"):
            med, sd = self._stat(name)
            out[f"median_{name}"] = med
            out[f"std_{name}"] = sd
        return _nan_to_none(out)


def _fit_and_predict(kind, X_tr, y_tr, X_te, hyper, seed, log_target):
    target = np.log(y_tr) if log_target else y_tr
    model = fit_regressor(kind, X_tr, target, seed=seed, **(hyper or {}))
    if log_target:
        model.target_transform = "log"
    return model, predict(model, X_te)


def kfold_cv_regression(kind: str, X, y, folds: int = 5, seed: int = 0, hyperparams=None,
                        log_target: bool = False) -> RegressionCV:
    """Per-fold held-out metrics for one regressor kind (plain random folds)."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    parts = kfold_indices(len(y), folds, seed)
    if min(len(p) for p in parts) < 2:
        raise ValueError("every fold needs at least 2 samples")
    metrics, sizes = [], []
    for test in parts:
        mask = np.ones(len(y), dtype=bool)
        mask[test] = False
        _, pred = _fit_and_predict(kind, X[mask], y[mask], X[test], hyperparams, seed, log_target)
        metrics.append(regression_metrics(y[test], pred))
        sizes.append(len(test))
    return RegressionCV(kind, metrics, sizes)


def bootstrap_ci(y_true, y_pred, n_boot: int = 1000, seed: int = 0, level: float = 0.95) -> dict:
    """Percentile intervals of rho, R^2 and MSE over resampled test pairs."""
    t = np.asarray(y_true, dtype=float)
    p = np.asarray(y_pred, dtype=float)
    rng = np.random.default_rng(seed)
    n = len(t)
    stats = np.full((n_boot, 3), np.nan)
    for b in range(n_boot):
        idx = rng.integers(0, n, size=n)
        m = regression_metrics(t[idx], p[idx])
        stats[b] = (m.pearson_rho, m.r_squared, m.mse)
    lo, hi = 100 * (1 - level) / 2, 100 * (1 + level) / 2
    out = {}
    for j, name in enumerate(("pearson_rho", "r_squared", "mse")):
        col = stats[:, j][np.isfinite(stats[:, j])]
        out[name] = [float(np.percentile(col, lo)), float(np.percentile(col, hi))] if col.size else None
    return out


@dataclass
class ComparisonReport:
    property: str
    status: str
    selected: str | None
    cv: dict
    test: dict = field(default_factory=dict)
    predictions: dict = field(default_factory=dict)
    y_test: np.ndarray | None = None
    test_ids: list | None = None
    models: dict = field(default_factory=dict)
    log_target: bool = False
    gate: float = GATE_RHO

    @property
    def suitable(self) -> bool:
        return self.selected is not None

    def to_dict(self) -> dict:
        return _nan_to_none({
            "property": self.property, "status": self.status, "selected": self.selected,
            "gate_median_rho": self.gate, "log_target": self.log_target,
            "target_space": "log" if self.log_target else "linear",
            "cv": self.cv, "test": self.test})

    def predictions_csv(self) -> str:
        kinds = list(self.predictions)
        lines = [",".join(["id", "y_true"] + kinds)]
        ids = self.test_ids or [str(i) for i in range(len(self.y_test))]
        for i, sid in enumerate(ids):
            row = [sid, repr(float(self.y_test[i]))] + [repr(float(self.predictions[k][i]))
                                                       for k in kinds]
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"


def compare_on_features(X_train, y_train, X_test, y_test, candidates=(OLS, SVR, LASSO),
                        folds: int = 5, seed: int = 0, hyperparams: dict | None = None,
                        feature_names=None, log_target: bool = False, n_boot: int = 1000,
                        gate: float = GATE_RHO, property: str = "", test_ids=None) -> ComparisonReport:
    """CV model selection on the training split, then a test-split comparison
    of the winner against LR-bf and PLSR.

    The winner is the candidate with the highest median CV rho; when that
    median is not above ``gate`` the report says "not suitable" and no test
    fits are made.
    """
    hyperparams = {k: dict(v or {}) for k, v in (hyperparams or {}).items()}
    lasso = hyperparams.setdefault(LASSO, {})
    if LASSO in candidates and "lam" not in lasso:
        # the penalty is chosen once on the whole training split; the
        # outer folds then measure the model at that penalty
        target = np.log(y_train) if log_target else np.asarray(y_train, dtype=float)
        sel = fit_regressor(LASSO, X_train, target, seed=seed, **lasso)
        lasso.clear()
        lasso["lam"] = sel.hyperparams["lambda_selected"]
    cv = {k: kfold_cv_regression(k, X_train, y_train, folds, seed, hyperparams.get(k), log_target)
          for k in candidates}
    meds = {k: cv[k].median_rho for k in candidates}
    best = max(candidates, key=lambda k: (meds[k] if math.isfinite(meds[k]) else -math.inf))
    cv_summary = {k: cv[k].summary() for k in candidates}
    if not (math.isfinite(meds[best]) and meds[best] > gate):
        return ComparisonReport(property, "not suitable", None, cv_summary, log_target=log_target,
                                gate=gate)
    report = ComparisonReport(property, f"selected: {best}", best, cv_summary,
                              y_test=np.asarray(y_test, dtype=float), test_ids=test_ids,
                              log_target=log_target, gate=gate)
    for kind in dict.fromkeys([best, LR_BF, PLSR]):
        hyper = dict(hyperparams.get(kind) or {})
        if kind == PLSR:
            hyper.setdefault("n_components", min(6, X_train.shape[0] - 1, X_train.shape[1]))
        model, pred = _fit_and_predict(kind, X_train, y_train, X_test, hyper, seed, log_target)
        if feature_names is not None:
            model.feature_names = list(feature_names)
            if kind == LR_BF:
                model.hyperparams["feature"] = feature_names[model.hyperparams["feature_index"]]
        report.models[kind] = model
        report.predictions[kind] = pred
        report.test[kind] = {**regression_metrics(y_test, pred).to_dict(),
                             "ci95": bootstrap_ci(y_test, pred, n_boot, seed)}
    return report


def compare_regressors(train, test, property: str, candidates=(OLS, SVR, LASSO), blocks=None,
                       std_mode: str = "whole", **kwargs) -> ComparisonReport:
    """Dataset-level wrapper: builds features, drops rows lacking the target,
    and runs :func:`compare_on_features`.

    In ``"whole"`` mode the standardization statistics come from the union
    of both splits; in ``"train"`` mode from the training split only.
    """
    from .dataset import SpectralDataset
    from .preprocess import BLOCK_ORDER, TRAIN, assemble_features

    blocks = blocks or BLOCK_ORDER
    tr = train.subset(train.has_target(property))
    te = test.subset(test.has_target(property))
    if len(tr) == 0 or len(te) == 0:
        raise ValueError(f"property {property!r} missing from one of the splits")
    if std_mode == TRAIN:
        ftr = assemble_features(tr, blocks, TRAIN)
        fte = assemble_features(te, blocks, TRAIN, ftr.standardization)
    else:
        both = SpectralDataset(tr.grid, tr.samples + te.samples, tr.property_names)
        fall = assemble_features(both, blocks)
        ftr, fte = fall.rows(np.arange(len(tr))), fall.rows(np.arange(len(tr), len(both)))
    return compare_on_features(ftr.values, tr.target(property), fte.values, te.target(property),
                               candidates, feature_names=[c.name for c in ftr.columns],
                               property=property, test_ids=te.ids, **kwargs)


# -------------------------------------------------------- classification

def confusion_matrix(y_true, y_pred, k: int) -> np.ndarray:
    t = np.asarray(y_true, dtype=np.int64)
    p = np.asarray(y_pred, dtype=np.int64)
    return np.bincount(t * k + p, minlength=k * k).reshape(k, k)


def mcc_binary(cm) -> float:
    """(TP*TN - FP*FN) / sqrt(...) with class 1 as positive; 0 if undefined."""
    cm = np.asarray(cm, dtype=float)
    tn, fp, fn, tp = cm[0, 0], cm[0, 1], cm[1, 0], cm[1, 1]
    den = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    return float((tp * tn - fp * fn) / math.sqrt(den)) if den > 0 else 0.0


def mcc_rk(cm) -> float:
    """Gorodkin's R_K for a K x K confusion matrix; 0 if undefined."""
    cm = np.asarray(cm, dtype=float)
    s = cm.sum()
    c = np.trace(cm)
    p = cm.sum(axis=0)
    t = cm.sum(axis=1)
    den = (s * s - p @ p) * (s * s - t @ t)
    return float((c * s - p @ t) / math.sqrt(den)) if den > 0 else 0.0


def mcc(cm) -> float:
    cm = np.asarray(cm)
    if cm.ndim != 2 or cm.shape[0] != cm.shape[1] or cm.shape[0] < 1:
        raise ValueError("confusion matrix must be square and nonempty")
    return mcc_binary(cm) if cm.shape[0] == 2 else mcc_rk(cm)


def _ratio(a, b):
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(b > 0, a / np.where(b > 0, b, 1), np.nan)


@dataclass
class ClassificationMetrics:
    """One-vs-rest per-class rates, their macro means, accuracy and MCC."""

    per_class: dict
    macro: dict
    accuracy: float
    mcc: float

    def to_dict(self) -> dict:
        return _nan_to_none({"per_class": self.per_class, "macro": self.macro,
                             "accuracy": self.accuracy, "mcc": self.mcc})


def classification_metrics(cm) -> ClassificationMetrics:
    cm = np.asarray(cm, dtype=float)
    s = cm.sum()
    tp = np.diag(cm)
    fp = cm.sum(axis=0) - tp
    fn = cm.sum(axis=1) - tp
    tn = s - tp - fp - fn
    rates = {"TPR": _ratio(tp, tp + fn), "TNR": _ratio(tn, tn + fp),
             "PPV": _ratio(tp, tp + fp), "NPV": _ratio(tn, tn + fn),
             "F1": _ratio(2 * tp, 2 * tp + fp + fn)}
    macro = {k: float(np.nanmean(v)) if np.any(np.isfinite(v)) else math.nan
             for k, v in rates.items()}
    acc = float(tp.sum() / s) if s > 0 else math.nan
    return ClassificationMetrics({k: v.tolist() for k, v in rates.items()}, macro, acc, mcc(cm))


def stratified_folds(labels, folds: int, seed: int) -> np.ndarray:
    """Fold index per sample: each class is shuffled and dealt round-robin.

    When some class has fewer than ``folds`` samples, stratification is
    impossible and plain random folds are used instead (with a warning).
    """
    y = np.asarray(labels)
    if folds < 2:
        raise ValueError("need at least 2 folds")
    if folds > len(y):
        raise ValueError(f"{folds} folds requested for {len(y)} samples")
    classes, counts = np.unique(y, return_counts=True)
    rng = np.random.default_rng(seed)
    fold_of = np.empty(len(y), dtype=np.int64)
    if np.any(counts < folds):
        warnings.warn(f"classes {classes[counts < folds].tolist()} have fewer than {folds} "
                      f"samples; using plain random folds")
        fold_of[rng.permutation(len(y))] = np.arange(len(y)) % folds
        return fold_of
    offset = 0
    for c in classes:
        idx = rng.permutation(np.flatnonzero(y == c))
        fold_of[idx] = (offset + np.arange(len(idx))) % folds
        offset += len(idx)
    return fold_of


def _check_labels(labels, k):
    y = np.asarray(labels, dtype=np.int64)
    if np.unique(y).size < 2:
        raise ValueError("need at least two classes")
    if y.min() < 0 or y.max() >= k:
        raise ValueError(f"labels must lie in [0, {k})")
    return y


def cv_predictions(config: ClassifierConfig, cost: CostMatrix, X, labels, folds: int = 5,
                   seed: int = 0, fold_of=None) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    y = _check_labels(labels, cost.k)
    fold_of = stratified_folds(y, folds, seed) if fold_of is None else fold_of
    pred = np.empty(len(y), dtype=np.int64)
    for f in range(folds):
        test = fold_of == f
        if not test.any():
            continue
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            model = fit_classifier(config, cost, X[~test], y[~test])
        pred[test] = predict_class(model, X[test])
    return pred


def kfold_cv_classification(config: ClassifierConfig, cost: CostMatrix, X, labels,
                            folds: int = 5, seed: int = 0):
    """Held-out predictions of every fold pooled into one confusion matrix.

    Returns ``(confusion, metrics)``.
    """
    y = _check_labels(labels, cost.k)
    pred = cv_predictions(config, cost, X, y, folds, seed)
    cm = confusion_matrix(y, pred, cost.k)
    return cm, classification_metrics(cm)


def majority_confusion(labels, k: int) -> np.ndarray:
    """Confusion matrix of the constant predictor of the most frequent class."""
    y = np.asarray(labels, dtype=np.int64)
    major = int(np.argmax(np.bincount(y, minlength=k)))
    return confusion_matrix(y, np.full(len(y), major), k)


# ----------------------------------------------------------- grid search

def normalize_grid(k: int, values) -> list[list[float]]:
    """One sorted value list per off-diagonal cell.

    ``values`` is either a single list shared by all cells or one list per
    cell (row-major order of the (true, predicted) cells).
    """
    cells = off_diagonal_cells(k)
    vals = list(values)
    if vals and isinstance(vals[0], (list, tuple, np.ndarray)):
        if len(vals) != len(cells):
            raise ValueError(f"{k} classes need {len(cells)} per-cell grids, got {len(vals)}")
        grid = [sorted(float(v) for v in cell) for cell in vals]
    else:
        grid = [sorted(float(v) for v in vals) for _ in cells]
    if any(len(g) == 0 for g in grid):
        raise ValueError("empty cost grid")
    if any(v < 0 or not math.isfinite(v) for g in grid for v in g):
        raise ValueError("grid costs must be finite and non-negative")
    return grid


def grid_size(k: int, values) -> int:
    return math.prod(len(g) for g in normalize_grid(k, values))


def grid_points(k: int, values):
    """Lazy lexicographic enumeration of cost vectors."""
    return itertools.product(*normalize_grid(k, values))


@dataclass
class GridSearchResult:
    config: str
    grid_spec: list
    costs: np.ndarray
    mcc: np.ndarray
    confusions: np.ndarray
    best_index: int
    seed: int
    folds: int

    @property
    def k(self) -> int:
        return self.confusions.shape[1]

    @property
    def best_mcc(self) -> float:
        return float(self.mcc[self.best_index])

    @property
    def best_cost(self) -> CostMatrix:
        return CostMatrix.from_vector(self.k, self.costs[self.best_index].tolist())

    @property
    def best_confusion(self) -> np.ndarray:
        return self.confusions[self.best_index]

    def to_dict(self) -> dict:
        return {"config": self.config, "grid_spec": self.grid_spec, "seed": self.seed,
                "folds": self.folds, "n_points": int(len(self.mcc)),
                "best_index": self.best_index, "best_mcc": self.best_mcc,
                "best_cost": self.best_cost.to_list(),
                "best_confusion": self.best_confusion.tolist()}

    def surface_csv(self) -> str:
        cells = off_diagonal_cells(self.k)
        lines = [",".join([f"c_{i}_{j}" for i, j in cells] + ["mcc"])]
        for c, m in zip(self.costs, self.mcc):
            lines.append(",".join([_num(v) for v in c] + [repr(float(m))]))
        return "\n".join(lines) + "\n"


def _num(v) -> str:
    v = float(v)
    return str(int(v)) if v.is_integer() else repr(v)


def _svm_unit(config, k, X, y, fold_of, folds, cost_vec):
    cost = CostMatrix.from_vector(k, cost_vec)
    pred = cv_predictions(config, cost, X, y, folds, 0, fold_of)
    return confusion_matrix(y, pred, k)


class _Checkpoint:
    """Append-only JSON-lines record of finished grid points."""

    def __init__(self, path, fingerprint: str):
        self.path = Path(path) if path else None
        self.done: dict[int, list] = {}
        if self.path is None:
            return
        if self.path.exists():
            with open(self.path) as fh:
                lines = [json.loads(x) for x in fh if x.strip()]
            if lines and lines[0].get("fingerprint") == fingerprint:
                for rec in lines[1:]:
                    self.done[rec["i"]] = rec["cm"]
                log.info("resuming grid search: %d points already done", len(self.done))
                return
            log.warning("checkpoint %s belongs to a different search; starting over", self.path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text(json.dumps({"fingerprint": fingerprint}) + "\n")

    def add(self, items):
        if self.path is None:
            return
        with open(self.path, "a") as fh:
            for i, cm in items:
                fh.write(json.dumps({"i": i, "cm": cm}) + "\n")


def _fingerprint(config, grid, X, y, folds, seed) -> str:
    h = hashlib.sha256()
    h.update(json.dumps([config.to_dict(), grid, folds, seed]).encode())
    h.update(np.ascontiguousarray(X, dtype=float).tobytes())
    h.update(np.ascontiguousarray(y, dtype=np.int64).tobytes())
    return h.hexdigest()


def cost_grid_search(config: ClassifierConfig, X, labels, values, folds: int = 5, seed: int = 0,
                     jobs: int = 1, checkpoint=None, checkpoint_every: int = 1000,
                     n_classes: int | None = None) -> GridSearchResult:
    """Exhaustive search over off-diagonal misclassification costs.

    Every grid point is scored by the MCC of its pooled k-fold confusion
    matrix; all points share one fold assignment. The winner is the highest
    MCC, ties going to the lexicographically smallest cost vector.

    Probabilistic families train independently of the costs, so their fold
    posteriors are computed once and only the expected-cost decision is
    repeated per point. SVMs are retrained per distinct per-sample weight
    vector. Results do not depend on ``jobs``. With ``checkpoint`` set,
    finished points are appended to that file every ``checkpoint_every``
    points and a rerun with the same inputs resumes from it.
    """
    X = np.asarray(X, dtype=float)
    k = int(n_classes or (int(np.max(labels)) + 1))
    y = _check_labels(labels, k)
    grid = normalize_grid(k, values)
    total = math.prod(len(g) for g in grid)
    fold_of = stratified_folds(y, folds, seed)
    ckpt = _Checkpoint(checkpoint, _fingerprint(config, grid, X, y, folds, seed))

    costs = np.array(list(itertools.product(*grid)), dtype=float).reshape(total, len(grid))
    confusions = np.zeros((total, k, k), dtype=np.int64)
    for i, cm in ckpt.done.items():
        confusions[i] = cm
    todo = np.array(sorted(set(range(total)) - set(ckpt.done)), dtype=np.int64)

    if config.probabilistic and todo.size:
        posts, allowed = [], []
        uniform = CostMatrix.uniform(k)
        for f in range(folds):
            test = fold_of == f
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", UserWarning)
                m = fit_classifier(config, uniform, X[~test], y[~test])
            posts.append((test, m.posterior(X[test]), m))

        def evaluate(idx):
            out = []
            for i in idx:
                cost = CostMatrix.from_vector(k, costs[i].tolist())
                pred = np.empty(len(y), dtype=np.int64)
                for test, P, m in posts:
                    pred[test] = decide(m, P, cost)
                out.append(confusion_matrix(y, pred, k))
            return out
    else:
        cache: dict[bytes, np.ndarray] = {}

        def weight_key(i):
            return CostMatrix.from_vector(k, costs[i].tolist()).sample_weights(y).tobytes()

        def evaluate(idx):
            keys = [weight_key(i) for i in idx]
            fresh = {}
            for key, i in zip(keys, idx):
                if key not in cache and key not in fresh:
                    fresh[key] = i
            if fresh:
                units = Parallel(n_jobs=jobs)(
                    delayed(_svm_unit)(config, k, X, y, fold_of, folds, costs[i].tolist())
                    for i in fresh.values())
                cache.update(zip(fresh.keys(), units))
            return [cache[key] for key in keys]

    step = max(1, int(checkpoint_every))
    for a in range(0, todo.size, step):
        idx = todo[a:a + step]
        cms = evaluate(idx)
        for i, cm in zip(idx, cms):
            confusions[i] = cm
        ckpt.add([(int(i), cm.tolist()) for i, cm in zip(idx, cms)])
        log.debug("grid search: %d / %d points", min(a + step, todo.size), todo.size)

    scores = np.array([mcc(cm) for cm in confusions])
    best = int(np.argmax(scores))
    return GridSearchResult(config.name, grid, costs, scores, confusions, best, seed, folds)
