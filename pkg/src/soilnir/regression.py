"""Linear regressors: OLS, epsilon-SVR, LASSO-CV, best-single-feature LR, PLSR.

Every fitter centers X and y, solves for the slope vector, and stores the
model as ``coefficients`` plus an ``intercept`` in original units, so all
kinds predict with the same ``X @ coefficients + intercept``.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numba import njit

from . import __version__
from ._smo import solve_dual

OLS = "OLS"
SVR = "SVR"
LASSO = "LASSO"
LR_BF = "LR_BF"
PLSR = "PLSR"
KINDS = (OLS, SVR, LASSO, LR_BF, PLSR)


@dataclass
class RegressionModel:
    kind: str
    coefficients: np.ndarray
    intercept: float
    hyperparams: dict = field(default_factory=dict)
    feature_names: list[str] | None = None
    standardization: dict | None = None
    target_transform: str | None = None

    @property
    def n_features(self) -> int:
        return self.coefficients.shape[0]

    def to_dict(self) -> dict:
        return {
            "format": "soilnir.regression_model",
            "toolkit_version": __version__,
            "kind": self.kind,
            "coefficients": self.coefficients.tolist(),
            "intercept": float(self.intercept),
            "hyperparams": _jsonable(self.hyperparams),
            "feature_names": self.feature_names,
            "standardization": self.standardization,
            "target_transform": self.target_transform,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, d: dict) -> "RegressionModel":
        if d.get("kind") not in KINDS:
            raise ValueError(f"unknown model kind {d.get('kind')!r}")
        return cls(d["kind"], np.asarray(d["coefficients"], dtype=float), float(d["intercept"]),
                   d.get("hyperparams", {}), d.get("feature_names"), d.get("standardization"),
                   d.get("target_transform"))

    @classmethod
    def from_json(cls, text: str) -> "RegressionModel":
        return cls.from_dict(json.loads(text))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _check_xy(X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise ValueError(f"shape mismatch: X {X.shape}, y {y.shape}")
    if X.shape[0] < 1:
        raise ValueError("no samples")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("non-finite values in X or y")
    return X, y


def predict(model: RegressionModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != model.n_features:
        raise ValueError(f"model expects {model.n_features} features, got {X.shape[1]}")
    out = X @ model.coefficients + model.intercept
    if model.target_transform == "log":
        out = np.exp(out)
    return out


def _finish(kind, beta, x_mean, y_mean, hyper):
    return RegressionModel(kind, beta, float(y_mean - x_mean @ beta), hyper)


# ---------------------------------------------------------------- OLS

def fit_ols(X, y) -> RegressionModel:
    """Least squares; minimum-norm slope when X is rank deficient."""
    X, y = _check_xy(X, y)
    xm, ym = X.mean(axis=0), y.mean()
    beta, _, rank, _ = np.linalg.lstsq(X - xm, y - ym, rcond=None)
    return _finish(OLS, beta, xm, ym, {"rank": int(rank)})


# -------------------------------------------------------------- LASSO

@njit(cache=True)
def _col_dot(X, j, v):
    s = 0.0
    for i in range(X.shape[0]):
        s += X[i, j] * v[i]
    return s


@njit(cache=True)
def _sweep(X, lam, beta, r, norms, coords):
    """One cyclic pass; returns the largest pre-update KKT violation."""
    n = X.shape[0]
    worst = 0.0
    for c in range(coords.shape[0]):
        j = coords[c]
        if norms[j] == 0.0:
            continue
        g = _col_dot(X, j, r) / n
        b = beta[j]
        if b > 0:
            viol = abs(g - lam)
        elif b < 0:
            viol = abs(g + lam)
        else:
            viol = max(abs(g) - lam, 0.0)
        if viol > worst:
            worst = viol
        z = g + norms[j] * b
        if z > lam:
            nb = (z - lam) / norms[j]
        elif z < -lam:
            nb = (z + lam) / norms[j]
        else:
            nb = 0.0
        if nb != b:
            d = nb - b
            for i in range(n):
                r[i] -= d * X[i, j]
            beta[j] = nb
    return worst


@njit(cache=True)
def _objective(X, y, lam, beta, r):
    n = X.shape[0]
    return 0.5 * np.dot(r, r) / n + lam * np.sum(np.abs(beta))


@njit(cache=True)
def _cd(X, y, lam, beta, r, norms, tol, max_sweeps, track):
    """Coordinate descent with active-set cycling.

    Converges when a full sweep sees no KKT violation above ``tol``.
    """
    p = X.shape[1]
    allc = np.arange(p)
    hist = np.empty(max_sweeps + 1 if track else 1)
    nh = 0
    sweeps = 0
    converged = False
    while sweeps < max_sweeps and not converged:
        worst = _sweep(X, lam, beta, r, norms, allc)
        sweeps += 1
        if track:
            hist[nh] = _objective(X, y, lam, beta, r)
            nh += 1
        if worst < tol:
            converged = True
            break
        active = np.flatnonzero(beta)
        while sweeps < max_sweeps and active.shape[0] > 0:
            w = _sweep(X, lam, beta, r, norms, active)
            sweeps += 1
            if track:
                hist[nh] = _objective(X, y, lam, beta, r)
                nh += 1
            if w < tol:
                break
    return sweeps, converged, hist[:nh]


def lambda_max(X, y) -> float:
    """Smallest penalty at which every LASSO coefficient is zero."""
    X, y = _check_xy(X, y)
    Xc = np.asfortranarray(X - X.mean(axis=0))
    yc = y - y.mean()
    n = X.shape[0]
    return max(abs(_col_dot(Xc, j, yc)) / n for j in range(X.shape[1]))


def lambda_path(lam_max: float, n_lambdas: int = 100, path_eps: float = 1e-3) -> np.ndarray:
    """Geometric grid from ``lam_max`` down to ``path_eps * lam_max``."""
    return lam_max * np.logspace(0.0, np.log10(path_eps), n_lambdas)


class _LassoProblem:
    """Centered data plus warm-start state for one training set."""

    def __init__(self, X, y):
        self.x_mean = X.mean(axis=0)
        self.y_mean = y.mean()
        self.Xc = np.asfortranarray(X - self.x_mean)
        self.yc = y - self.y_mean
        n = X.shape[0]
        self.norms = (self.Xc ** 2).sum(axis=0) / n
        self.beta = np.zeros(X.shape[1])
        self.r = self.yc.copy()

    def solve(self, lam, tol, max_sweeps, track=False):
        sweeps, ok, hist = _cd(self.Xc, self.yc, float(lam), self.beta, self.r, self.norms,
                               float(tol), int(max_sweeps), track)
        if not ok:
            warnings.warn(f"LASSO coordinate descent hit {max_sweeps} sweeps at lambda={lam:.3g}")
        return hist

    def intercept(self):
        return float(self.y_mean - self.x_mean @ self.beta)


def lasso_coordinate_descent(X, y, lam: float, tol: float = 1e-9, max_sweeps: int = 100_000,
                             return_history: bool = False):
    """LASSO at a single penalty by cyclic coordinate descent.

    Minimizes ``||y - Xb - c||^2 / (2n) + lam * ||b||_1``. Returns
    ``(coefficients, intercept)``, plus the objective after every sweep when
    ``return_history`` is set.
    """
    X, y = _check_xy(X, y)
    prob = _LassoProblem(X, y)
    hist = prob.solve(lam, tol, max_sweeps, track=return_history)
    out = (prob.beta.copy(), prob.intercept())
    return out + (hist,) if return_history else out


def kfold_indices(n: int, folds: int, seed: int) -> list[np.ndarray]:
    """Random, balanced fold membership (sizes differ by at most one)."""
    if folds < 2:
        raise ValueError("need at least 2 folds")
    if folds > n:
        raise ValueError(f"{folds} folds requested for {n} samples")
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(part) for part in np.array_split(perm, folds)]


def _lasso_fold_mse(X, y, test_idx, lams, tol, max_sweeps, max_dev_ratio):
    """Held-out MSE along the path.

    Once the training fit explains ``max_dev_ratio`` of the variance the
    path stops and the remaining penalties reuse the last solution.
    """
    mask = np.ones(len(y), dtype=bool)
    mask[test_idx] = False
    prob = _LassoProblem(X[mask], y[mask])
    tss = float(prob.yc @ prob.yc)
    mse = np.empty(len(lams))
    for k, lam in enumerate(lams):
        prob.solve(lam, tol, max_sweeps)
        resid = y[test_idx] - (X[test_idx] @ prob.beta + prob.intercept())
        mse[k] = np.mean(resid ** 2)
        if tss > 0 and 1.0 - float(prob.r @ prob.r) / tss >= max_dev_ratio:
            mse[k + 1:] = mse[k]
            break
    return mse


def fit_lasso(X, y, lam: float, n_lambdas: int = 100, path_eps: float = 1e-3,
              tol: float = 1e-8, path_tol: float = 1e-4,
              max_sweeps: int = 100_000) -> RegressionModel:
    """LASSO at a fixed penalty, warm-started down the geometric path."""
    X, y = _check_xy(X, y)
    if not lam >= 0:
        raise ValueError("lambda must be non-negative")
    prob = _LassoProblem(X, y)
    lmax = lambda_max(X, y)
    loose = max(path_tol * float(y.std()), tol)
    for step in lambda_path(lmax, n_lambdas, path_eps) if lmax > 0 else ():
        if step <= lam:
            break
        prob.solve(step, loose, max_sweeps)
    prob.solve(lam, tol, max_sweeps)
    return RegressionModel(LASSO, prob.beta.copy(), prob.intercept(),
                           {"lambda_selected": float(lam), "n_lambdas": n_lambdas,
                            "path_eps": path_eps})


def fit_lasso_cv(X, y, n_lambdas: int = 100, path_eps: float = 1e-3, folds: int = 5,
                 seed: int = 0, tol: float = 1e-8, path_tol: float = 1e-4,
                 max_sweeps: int = 100_000, jobs: int = 1,
                 max_dev_ratio: float = 0.999) -> RegressionModel:
    """LASSO with the penalty chosen by k-fold CV over a geometric path.

    All folds share the full-data penalty grid; the penalty with the lowest
    mean held-out MSE wins (ties go to the larger penalty) and the model is
    refit on all samples along the path down to it.

    Path solves stop at a KKT violation of ``path_tol * std(y)``; the final
    refit at the selected penalty is polished to ``tol`` (absolute). A fold's
    path is cut short once its training fit explains ``max_dev_ratio`` of
    the target variance (the fit is then near interpolation and smaller
    penalties only slow the solver down).
    """
    X, y = _check_xy(X, y)
    n = X.shape[0]
    if folds > n:
        raise ValueError(f"{folds} folds requested for {n} samples")
    lmax = lambda_max(X, y)
    hyper = {"n_lambdas": n_lambdas, "path_eps": path_eps, "folds": folds, "seed": seed}
    if lmax == 0.0:
        return _finish(LASSO, np.zeros(X.shape[1]), X.mean(axis=0), y.mean(),
                       {**hyper, "lambda_selected": 0.0, "lambda_path": []})
    lams = lambda_path(lmax, n_lambdas, path_eps)
    loose = max(path_tol * float(y.std()), tol)
    parts = kfold_indices(n, folds, seed)
    if jobs != 1:
        from joblib import Parallel, delayed
        mses = Parallel(n_jobs=jobs)(delayed(_lasso_fold_mse)(X, y, t, lams, loose, max_sweeps,
                                                             max_dev_ratio)
                                     for t in parts)
    else:
        mses = [_lasso_fold_mse(X, y, t, lams, loose, max_sweeps, max_dev_ratio)
                for t in parts]
    cv_mse = np.mean(mses, axis=0)
    best = int(np.argmin(cv_mse))
    prob = _LassoProblem(X, y)
    for lam in lams[:best]:
        prob.solve(lam, loose, max_sweeps)
    prob.solve(lams[best], tol, max_sweeps)
    return RegressionModel(LASSO, prob.beta.copy(), prob.intercept(), {
        **hyper, "lambda_selected": float(lams[best]), "lambda_path": lams.tolist(),
        "cv_mse": cv_mse.tolist()})


# ---------------------------------------------------------------- SVR

def fit_svr_linear(X, y, C: float = 1.0, epsilon: float = 0.1, tol: float = 1e-3,
                   max_iter: int | None = None) -> RegressionModel:
    """Linear-kernel epsilon-SVR solved in the dual by SMO.

    Minimizes ``0.5 ||w||^2 + C * sum(max(0, |y - Xw - b| - epsilon))``
    with an unpenalized bias ``b``.
    """
    if not C > 0 or not epsilon > 0:
        raise ValueError("C and epsilon must be positive")
    X, y = _check_xy(X, y)
    n = X.shape[0]
    if n < 2:
        raise ValueError("SVR needs at least 2 samples")
    xm, ym = X.mean(axis=0), y.mean()
    Xc = X - xm
    yc = y - ym
    K = Xc @ Xc.T
    src = np.concatenate([np.arange(n), np.arange(n)])
    ysign = np.concatenate([np.ones(n), -np.ones(n)])
    p = np.concatenate([epsilon - yc, epsilon + yc])
    Cv = np.full(2 * n, float(C))
    beta, rho, iters = solve_dual(K, src, ysign, p, Cv, tol, max_iter)
    alpha, alpha_star = beta[:n], beta[n:]
    w = Xc.T @ (alpha - alpha_star)
    b = -rho
    return _finish(SVR, w, xm, ym + b, {
        "C": C, "epsilon": epsilon, "tol": tol, "iterations": int(iters),
        "dual_alpha": alpha.tolist(), "dual_alpha_star": alpha_star.tolist()})


def svr_objective(X, y, w, b, C: float = 1.0, epsilon: float = 0.1) -> float:
    X, y = _check_xy(X, y)
    r = np.abs(y - X @ np.atleast_1d(w) - b)
    return 0.5 * float(np.dot(w, w)) + C * float(np.maximum(r - epsilon, 0.0).sum())


# -------------------------------------------------------------- LR-bf

def column_correlations(X, y) -> np.ndarray:
    """Pearson r of every column with y (0 for constant columns)."""
    X, y = _check_xy(X, y)
    Xc = X - X.mean(axis=0)
    yc = y - y.mean()
    den = np.sqrt((Xc ** 2).sum(axis=0) * (yc ** 2).sum())
    num = Xc.T @ yc
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)
    return np.clip(r, -1.0, 1.0)


def fit_lr_best_feature(X, y, feature_names: Sequence[str] | None = None) -> RegressionModel:
    """Univariate OLS on the column with the largest |Pearson r| to y."""
    X, y = _check_xy(X, y)
    if X.shape[0] < 2:
        raise ValueError("LR-bf needs at least 2 samples")
    if np.all(X.std(axis=0) == 0):
        raise ValueError("all columns are constant")
    r = column_correlations(X, y)
    r[X.std(axis=0) == 0] = 0.0
    j = int(np.argmax(np.abs(r)))
    x = X[:, j]
    xc = x - x.mean()
    slope = float(xc @ (y - y.mean()) / (xc @ xc))
    beta = np.zeros(X.shape[1])
    beta[j] = slope
    hyper = {"feature_index": j, "correlation": float(r[j])}
    if feature_names is not None:
        hyper["feature"] = feature_names[j]
    return _finish(LR_BF, beta, X.mean(axis=0), y.mean(), hyper)


# --------------------------------------------------------------- PLSR

def plsr_components(X, y, n_components: int = 6, max_iter: int = 10_000, inner_tol: float = 1e-9):
    """NIPALS PLS1 on centered data.

    Returns a dict with weights ``W`` (p x a), X-loadings ``P`` (p x a),
    y-loadings ``q`` (a), scores ``T`` (n x a) and per-component inner
    iteration counts. Extraction stops early, with a warning, once the
    deflated data carry no more covariance.
    """
    X, y = _check_xy(X, y)
    n, p = X.shape
    if n_components < 1 or n_components > min(n - 1, p):
        raise ValueError(f"n_components must lie in [1, {min(n - 1, p)}], got {n_components}")
    E = X - X.mean(axis=0)
    f = y - y.mean()
    scale = np.linalg.norm(E) * np.linalg.norm(f)
    W, P, q, T, iters = [], [], [], [], []
    for a in range(n_components):
        xty = E.T @ f
        if scale == 0 or np.linalg.norm(xty) <= 1e-12 * scale:
            warnings.warn(f"PLSR: deflated data exhausted after {a} component(s)")
            break
        u = f.copy()
        t_prev = None
        for it in range(1, max_iter + 1):
            w = E.T @ u
            w /= np.linalg.norm(w)
            t = E @ w
            c = (t @ f) / (t @ t)
            u = f / c
            if t_prev is not None and np.linalg.norm(t - t_prev) <= inner_tol * np.linalg.norm(t):
                break
            t_prev = t
        tt = t @ t
        p_a = E.T @ t / tt
        q_a = (f @ t) / tt
        E = E - np.outer(t, p_a)
        f = f - q_a * t
        W.append(w)
        P.append(p_a)
        q.append(q_a)
        T.append(t)
        iters.append(it)
    k = len(W)
    return {
        "W": np.array(W).T.reshape(p, k),
        "P": np.array(P).T.reshape(p, k),
        "q": np.array(q),
        "T": np.array(T).T.reshape(n, k),
        "iterations": iters,
    }


def fit_plsr(X, y, n_components: int = 6, max_iter: int = 10_000,
             inner_tol: float = 1e-9) -> RegressionModel:
    """PLS1 regression collapsed to a coefficient vector."""
    X, y = _check_xy(X, y)
    comp = plsr_components(X, y, n_components, max_iter, inner_tol)
    W, P, q = comp["W"], comp["P"], comp["q"]
    if q.size:
        beta = W @ np.linalg.solve(P.T @ W, q)
    else:
        beta = np.zeros(X.shape[1])
    return _finish(PLSR, beta, X.mean(axis=0), y.mean(), {
        "n_components": int(q.size), "requested_components": n_components,
        "max_iterations": max_iter, "inner_tolerance": inner_tol,
        "weights": W.tolist(), "x_loadings": P.tolist(), "y_loadings": q.tolist()})


# ------------------------------------------------------------ dispatch

def fit_regressor(kind: str, X, y, seed: int = 0, feature_names=None, **hyper) -> RegressionModel:
    """Fit any of the five kinds by name."""
    if kind == OLS:
        m = fit_ols(X, y)
    elif kind == SVR:
        m = fit_svr_linear(X, y, **hyper)
    elif kind == LASSO and "lam" in hyper:
        m = fit_lasso(X, y, **hyper)
    elif kind == LASSO:
        m = fit_lasso_cv(X, y, seed=seed, **hyper)
    elif kind == LR_BF:
        m = fit_lr_best_feature(X, y, feature_names)
    elif kind == PLSR:
        m = fit_plsr(X, y, **hyper)
    else:
        raise ValueError(f"unknown regressor kind {kind!r}")
    if feature_names is not None:
        m.feature_names = list(feature_names)
    return m
