"""Slow, obviously-correct reference implementations used only by tests."""
import cmath
import itertools
import math

import numpy as np


def direct_dft_magnitude(f):
    n = len(f)
    return np.array([abs(sum(f[i] * cmath.exp(-2j * math.pi * k * i / n) for i in range(n)))
                     for k in range(n)])


def stencil_d1(f, h):
    n = len(f)
    out = []
    for i in range(n):
        if i == 0:
            out.append((f[1] - f[0]) / h)
        elif i == n - 1:
            out.append((f[n - 1] - f[n - 2]) / h)
        else:
            out.append((f[i + 1] - f[i - 1]) / (2 * h))
    return out


def stencil_d2(f, h):
    n = len(f)
    inner = [(f[i + 1] - 2 * f[i] + f[i - 1]) / h ** 2 for i in range(1, n - 1)]
    return [inner[0]] + inner + [inner[-1]]


def normal_equations(X, y):
    """Slope and intercept from the augmented normal equations."""
    A = np.column_stack([X, np.ones(len(y))])
    coef = np.linalg.solve(A.T @ A, A.T @ y)
    return coef[:-1], coef[-1]


def gorodkin(cm):
    """R_K written out cell by cell."""
    k = len(cm)
    s = sum(cm[i][j] for i in range(k) for j in range(k))
    c = sum(cm[i][i] for i in range(k))
    p = [sum(cm[i][j] for i in range(k)) for j in range(k)]
    t = [sum(cm[i][j] for j in range(k)) for i in range(k)]
    num = c * s - sum(p[j] * t[j] for j in range(k))
    den = math.sqrt((s * s - sum(v * v for v in p)) * (s * s - sum(v * v for v in t)))
    return num / den if den else 0.0


def binary_mcc(tp, tn, fp, fn):
    den = math.sqrt((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn))
    return (tp * tn - fp * fn) / den if den else 0.0


def svr_grid_min(x, y, C, eps, w_range, b_range, steps):
    """Best primal objective on a dense (w, b) grid, refined twice."""
    def obj(w, b):
        r = np.abs(y[None, None, :] - w[:, :, None] * x[None, None, :] - b[:, :, None])
        return 0.5 * w ** 2 + C * np.maximum(r - eps, 0).sum(axis=-1)

    lo_w, hi_w = w_range
    lo_b, hi_b = b_range
    best = None
    for _ in range(3):
        ws = np.linspace(lo_w, hi_w, steps)
        bs = np.linspace(lo_b, hi_b, steps)
        W, B = np.meshgrid(ws, bs, indexing="ij")
        O = obj(W, B)
        i, j = np.unravel_index(np.argmin(O), O.shape)
        best = (float(O[i, j]), float(W[i, j]), float(B[i, j]))
        dw = (hi_w - lo_w) / (steps - 1) * 2
        db = (hi_b - lo_b) / (steps - 1) * 2
        lo_w, hi_w = best[1] - dw, best[1] + dw
        lo_b, hi_b = best[2] - db, best[2] + db
    return best


def gini_split(xs, ys, k):
    """Best (gain, threshold) over midpoints for one feature, by enumeration."""
    def imp(labels):
        n = len(labels)
        if n == 0:
            return 0.0
        return n - sum(labels.count(c) ** 2 for c in range(k)) / n

    vals = sorted(set(xs))
    parent = imp(list(ys))
    best = (0.0, None)
    for a, b in zip(vals, vals[1:]):
        thr = (a + b) / 2
        left = [c for v, c in zip(xs, ys) if v <= thr]
        right = [c for v, c in zip(xs, ys) if v > thr]
        gain = parent - imp(left) - imp(right)
        if gain > best[0] + 1e-12:
            best = (gain, thr)
    return best


def grid_count(values_per_cell):
    return sum(1 for _ in itertools.product(*values_per_cell))
