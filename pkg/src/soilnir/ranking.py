"""Composite ranking of derivative features: correlation, LASSO magnitude,
univariate F-statistic and raw variance, each min-max scaled and summed."""
from __future__ import annotations

import csv
import io
import json
import warnings
from dataclasses import dataclass

import numpy as np

from .preprocess import Block, FeatureId, FeatureMatrix
from .regression import column_correlations, fit_lasso_cv

RANKED_BLOCKS = (Block.D1, Block.D2)
SCORES = ("corr_score", "lasso_score", "f_score", "var_score")


@dataclass(frozen=True)
class RankEntry:
    feature: FeatureId
    corr_score: float
    lasso_score: float
    f_score: float
    var_score: float

    @property
    def total(self) -> float:
        return self.corr_score + self.lasso_score + self.f_score + self.var_score

    def to_dict(self) -> dict:
        return {"feature": self.feature.name, **self.feature.to_dict(),
                "corr_score": self.corr_score, "lasso_score": self.lasso_score,
                "f_score": self.f_score, "var_score": self.var_score, "total": self.total}


@dataclass
class FeatureRanking:
    """Entries sorted by total score, highest first."""

    property: str
    entries: list[RankEntry]
    lambda_selected: float | None = None

    def top(self, n: int) -> list[RankEntry]:
        return self.entries[:n]

    def to_dict(self) -> dict:
        return {"property": self.property, "lambda_selected": self.lambda_selected,
                "entries": [e.to_dict() for e in self.entries]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)


def minmax(v, label: str = "score") -> np.ndarray:
    """Scale to [0, 1]; a constant vector becomes all zeros (with a warning)."""
    v = np.asarray(v, dtype=float)
    lo, hi = v.min(), v.max()
    if not hi > lo:
        warnings.warn(f"{label} is constant over the ranked features; scored 0")
        return np.zeros_like(v)
    return np.clip((v - lo) / (hi - lo), 0.0, 1.0)


def f_statistic(r, n: int) -> np.ndarray:
    """F of the univariate regression with correlation r on n samples."""
    r2 = np.asarray(r, dtype=float) ** 2
    return (n - 2) * r2 / np.maximum(1.0 - r2, 1e-300)


def rank_columns(X, raw_variance, y, columns, seed: int = 0, property: str = "",
                 **lasso_kw) -> FeatureRanking:
    """Rank the columns of a standardized matrix ``X`` against ``y``.

    ``raw_variance`` is each column's variance before standardization.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n = X.shape[0]
    if n < 3:
        raise ValueError("ranking needs at least 3 samples")
    if not np.all(np.isfinite(y)):
        raise ValueError("target has missing or non-finite values")
    if np.ptp(y) == 0:
        raise ValueError("target is constant")
    r = column_correlations(X, y)
    lasso = fit_lasso_cv(X, y, seed=seed, **lasso_kw)
    scores = {
        "corr_score": minmax(np.abs(r), "correlation"),
        "lasso_score": minmax(np.abs(lasso.coefficients), "LASSO coefficient"),
        "f_score": minmax(f_statistic(r, n), "F-statistic"),
        "var_score": minmax(raw_variance, "variance"),
    }
    entries = [RankEntry(c, *(float(scores[s][j]) for s in SCORES))
               for j, c in enumerate(columns)]
    entries.sort(key=lambda e: (-e.total, e.feature.sort_key()))
    return FeatureRanking(property, entries, lasso.hyperparams.get("lambda_selected"))


def rank_features(fm: FeatureMatrix, y, seed: int = 0, property: str = "",
                  **lasso_kw) -> FeatureRanking:
    """Rank the D1 and D2 columns of a feature matrix; other blocks are ignored."""
    sub = fm.select(RANKED_BLOCKS)
    if not sub.columns:
        raise ValueError("feature matrix has no derivative columns")
    return rank_columns(sub.values, sub.standardization.std ** 2, y, sub.columns, seed,
                        property, **lasso_kw)


def heatmap_table(rankings) -> tuple[np.ndarray, list[str], np.ndarray]:
    """(wavelengths, property names, scores[wavelength, property]).

    A wavelength's score is the larger of its D1 and D2 totals.
    """
    rankings = list(rankings)
    wl = {}
    for rk in rankings:
        for e in rk.entries:
            seen = wl.setdefault(e.feature.index, e.feature.wavelength_nm)
            if abs(seen - e.feature.wavelength_nm) > 1e-6:
                raise ValueError("rankings do not share a wavelength grid")
    order = sorted(wl)
    row = {i: k for k, i in enumerate(order)}
    table = np.zeros((len(order), len(rankings)))
    for p, rk in enumerate(rankings):
        for e in rk.entries:
            r = row[e.feature.index]
            table[r, p] = max(table[r, p], e.total)
    return np.array([wl[i] for i in order]), [rk.property for rk in rankings], table


def ranking_heatmap_export(rankings) -> str:
    """CSV with a ``wavelength_nm`` column and one score column per property."""
    wl, names, table = heatmap_table(rankings)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["wavelength_nm"] + names)
    for x, row in zip(wl, table):
        w.writerow([repr(float(x))] + [repr(float(v)) for v in row])
    return buf.getvalue()
