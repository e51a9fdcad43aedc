"""Class schemes (value thresholds -> class index) and misclassification costs."""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class ClassScheme:
    """Partition of the real line by ordered thresholds.

    Class 0 is ``(-inf, t1)``, class i is ``[t_i, t_{i+1})`` and the last
    class is ``[t_last, inf)``: boundaries belong to the class above.
    """

    property: str
    thresholds: tuple[float, ...]
    class_names: tuple[str, ...]

    def __post_init__(self):
        t = tuple(float(v) for v in self.thresholds)
        object.__setattr__(self, "thresholds", t)
        object.__setattr__(self, "class_names", tuple(self.class_names))
        if any(b <= a for a, b in zip(t, t[1:])):
            raise ValueError(f"{self.property}: thresholds must be strictly increasing")
        if len(self.class_names) != len(t) + 1:
            raise ValueError(f"{self.property}: {len(t)} thresholds need {len(t) + 1} class names")

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def assign(self, value: float) -> int:
        if not math.isfinite(value):
            raise ValueError(f"cannot classify non-finite value {value!r}")
        return bisect.bisect_right(self.thresholds, value)

    def assign_many(self, values) -> np.ndarray:
        v = np.asarray(values, dtype=float)
        if not np.all(np.isfinite(v)):
            raise ValueError("cannot classify non-finite values")
        return np.searchsorted(np.asarray(self.thresholds), v, side="right")

    def to_dict(self) -> dict:
        return {"property": self.property, "thresholds": list(self.thresholds),
                "class_names": list(self.class_names)}

    @classmethod
    def from_dict(cls, d: dict) -> "ClassScheme":
        return cls(d["property"], tuple(d["thresholds"]), tuple(d["class_names"]))


def assign_class(scheme: ClassScheme, value: float) -> int:
    return scheme.assign(value)


# every default is a contiguous partition of the line; override any of
# them through the run config
DEFAULT_SCHEMES = {
    "pH": ClassScheme("pH", (6.0, 7.3), ("acidity correction", "none correction",
                                         "alkalinity correction")),
    "OM": ClassScheme("OM", (3.0, 5.0), ("Low", "Medium", "High")),
    "Ca": ClassScheme("Ca", (3.0, 6.0), ("Low", "Medium", "High")),
    "Mg": ClassScheme("Mg", (1.5, 5.0), ("Low", "Medium", "High")),
    "K": ClassScheme("K", (0.2, 0.4), ("Low", "Medium", "High")),
    "Na": ClassScheme("Na", (1.0,), ("Acceptable", "Not acceptable")),
}


def off_diagonal_cells(k: int) -> list[tuple[int, int]]:
    """Row-major (true, predicted) error cells of a k x k matrix."""
    return [(i, j) for i in range(k) for j in range(k) if i != j]


class CostMatrix:
    """Non-negative K x K misclassification penalties with a zero diagonal.

    ``costs[j, k]`` is the penalty for predicting class k when the truth is j.
    """

    def __init__(self, costs):
        c = np.array(costs, dtype=float)
        if c.ndim != 2 or c.shape[0] != c.shape[1] or c.shape[0] < 2:
            raise ValueError(f"cost matrix must be square with K >= 2, got shape {c.shape}")
        if np.any(np.diag(c) != 0):
            raise ValueError("cost matrix diagonal must be zero")
        if np.any(c < 0) or not np.all(np.isfinite(c)):
            raise ValueError("costs must be finite and non-negative")
        c.setflags(write=False)
        self.costs = c

    @classmethod
    def uniform(cls, k: int) -> "CostMatrix":
        return cls(1.0 - np.eye(k))

    @classmethod
    def from_vector(cls, k: int, values: Sequence[float]) -> "CostMatrix":
        cells = off_diagonal_cells(k)
        if len(values) != len(cells):
            raise ValueError(f"{k} classes need {len(cells)} cost values, got {len(values)}")
        c = np.zeros((k, k))
        for (i, j), v in zip(cells, values):
            c[i, j] = v
        return cls(c)

    @property
    def k(self) -> int:
        return self.costs.shape[0]

    def vector(self) -> list[float]:
        return [float(self.costs[i, j]) for i, j in off_diagonal_cells(self.k)]

    def is_uniform(self) -> bool:
        return bool(np.all(self.costs == 1.0 - np.eye(self.k)))

    def sample_weights(self, labels) -> np.ndarray:
        """Per-sample weights: row sums of the cost matrix, scaled to mean 1."""
        w = self.costs.sum(axis=1)[np.asarray(labels)]
        m = w.mean()
        if m == 0:
            return np.ones_like(w)
        return w / m

    def __eq__(self, other):
        return isinstance(other, CostMatrix) and np.array_equal(self.costs, other.costs)

    def __repr__(self):
        return f"CostMatrix({self.costs.tolist()})"

    def to_list(self) -> list[list[float]]:
        return self.costs.tolist()


def expected_cost_decision(posterior, cost: CostMatrix, allowed=None, rtol: float = 1e-12):
    """Pick argmin_k sum_j P(j|x) cost[j, k] for every row of ``posterior``.

    Costs within ``rtol`` of the row minimum count as ties, resolved toward
    the lower class index. ``allowed`` restricts the candidate classes.
    """
    P = np.asarray(posterior, dtype=float)
    ec = P @ cost.costs
    if allowed is not None:
        mask = np.zeros(cost.k, dtype=bool)
        mask[np.asarray(allowed)] = True
        ec = np.where(mask, ec, np.inf)
    best = ec.min(axis=1, keepdims=True)
    tied = ec <= best + rtol * np.maximum(np.abs(best), 1.0)
    return np.argmax(tied, axis=1)
