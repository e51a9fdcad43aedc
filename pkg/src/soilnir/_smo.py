"""SMO solver for box-constrained SVM duals with one equality constraint.

Solves

    min  0.5 * b' Q b + p' b
    s.t. y' b = 0,  0 <= b_i <= C_i,  y_i in {-1, +1}

with Q_ij = y_i y_j K[src_i, src_j]. ``src`` maps each dual variable to a
row of the base kernel matrix, which lets epsilon-SVR (two variables per
sample) and classification share one solver. Working-set selection uses
second-order information, variables pinned at a bound are shrunk out of
the active set, and the bias term is left unregularized.
"""
import numpy as np
from numba import njit

TAU = 1e-12


@njit(cache=True)
def _reconstruct(K, src, y, p, beta, G):
    n = y.shape[0]
    for t in range(n):
        G[t] = p[t]
    for s in range(n):
        if beta[s] != 0.0:
            for t in range(n):
                G[t] += y[t] * y[s] * beta[s] * K[src[s], src[t]]


@njit(cache=True)
def _shrinkable(t, beta, C, y, G, gmax1, gmax2):
    if beta[t] >= C[t]:
        return -G[t] > gmax1 if y[t] > 0 else -G[t] > gmax2
    if beta[t] <= 0.0:
        return G[t] > gmax2 if y[t] > 0 else G[t] > gmax1
    return False


@njit(cache=True)
def _solve(K, src, y, p, C, tol, max_iter, shrinking):
    n = y.shape[0]
    beta = np.zeros(n)
    G = p.copy()
    QD = np.empty(n)
    for t in range(n):
        QD[t] = K[src[t], src[t]]
    active = np.arange(n)
    m = n
    unshrunk = False
    counter = min(n, 1000)
    it = 0
    while it < max_iter:
        counter -= 1
        if shrinking and counter == 0:
            counter = min(n, 1000)
            # variables stuck at a bound far from violating are set aside
            g1 = -np.inf
            g2 = -np.inf
            for c in range(m):
                t = active[c]
                if y[t] > 0:
                    if beta[t] < C[t]:
                        g1 = max(g1, -G[t])
                    if beta[t] > 0:
                        g2 = max(g2, G[t])
                else:
                    if beta[t] < C[t]:
                        g2 = max(g2, -G[t])
                    if beta[t] > 0:
                        g1 = max(g1, G[t])
            if not unshrunk and g1 + g2 <= 10.0 * tol:
                unshrunk = True
                _reconstruct(K, src, y, p, beta, G)
                m = n
            c = 0
            while c < m:
                if _shrinkable(active[c], beta, C, y, G, g1, g2):
                    m -= 1
                    active[c], active[m] = active[m], active[c]
                else:
                    c += 1

        gmax = -np.inf
        i = -1
        for c in range(m):
            t = active[c]
            if y[t] > 0:
                if beta[t] < C[t] and -G[t] >= gmax:
                    gmax = -G[t]
                    i = t
            else:
                if beta[t] > 0 and G[t] >= gmax:
                    gmax = G[t]
                    i = t
        gmax2 = -np.inf
        j = -1
        obj_min = np.inf
        for c in range(m):
            t = active[c]
            if y[t] > 0:
                if beta[t] > 0:
                    if G[t] >= gmax2:
                        gmax2 = G[t]
                    if i >= 0:
                        gd = gmax + G[t]
                        if gd > 0:
                            qi = y[i] * y[t] * K[src[i], src[t]]
                            a = QD[i] + QD[t] - 2.0 * y[i] * qi
                            if a <= 0:
                                a = TAU
                            od = -(gd * gd) / a
                            if od <= obj_min:
                                obj_min = od
                                j = t
            else:
                if beta[t] < C[t]:
                    if -G[t] >= gmax2:
                        gmax2 = -G[t]
                    if i >= 0:
                        gd = gmax - G[t]
                        if gd > 0:
                            qi = y[i] * y[t] * K[src[i], src[t]]
                            a = QD[i] + QD[t] + 2.0 * y[i] * qi
                            if a <= 0:
                                a = TAU
                            od = -(gd * gd) / a
                            if od <= obj_min:
                                obj_min = od
                                j = t
        if gmax + gmax2 < tol or j < 0 or i < 0:
            if m == n:
                break
            # optimal on the shrunk set: restore everything and re-check
            _reconstruct(K, src, y, p, beta, G)
            m = n
            counter = 2  # next pass selects over the full set before shrinking again
            continue
        it += 1

        qij = y[i] * y[j] * K[src[i], src[j]]
        ci = C[i]
        cj = C[j]
        ai_old = beta[i]
        aj_old = beta[j]
        if y[i] != y[j]:
            a = QD[i] + QD[j] + 2.0 * qij
            if a <= 0:
                a = TAU
            delta = (-G[i] - G[j]) / a
            diff = beta[i] - beta[j]
            beta[i] += delta
            beta[j] += delta
            if diff > 0:
                if beta[j] < 0:
                    beta[j] = 0.0
                    beta[i] = diff
            else:
                if beta[i] < 0:
                    beta[i] = 0.0
                    beta[j] = -diff
            if diff > ci - cj:
                if beta[i] > ci:
                    beta[i] = ci
                    beta[j] = ci - diff
            else:
                if beta[j] > cj:
                    beta[j] = cj
                    beta[i] = cj + diff
        else:
            a = QD[i] + QD[j] - 2.0 * qij
            if a <= 0:
                a = TAU
            delta = (G[i] - G[j]) / a
            s = beta[i] + beta[j]
            beta[i] -= delta
            beta[j] += delta
            if s > ci:
                if beta[i] > ci:
                    beta[i] = ci
                    beta[j] = s - ci
            else:
                if beta[j] < 0:
                    beta[j] = 0.0
                    beta[i] = s
            if s > cj:
                if beta[j] > cj:
                    beta[j] = cj
                    beta[i] = s - cj
            else:
                if beta[i] < 0:
                    beta[i] = 0.0
                    beta[j] = s
        di = beta[i] - ai_old
        dj = beta[j] - aj_old
        for c in range(m):
            t = active[c]
            G[t] += y[t] * (y[i] * di * K[src[i], src[t]] + y[j] * dj * K[src[j], src[t]])

    if m < n:
        _reconstruct(K, src, y, p, beta, G)
    # bias from free variables, else midpoint of the feasible interval
    ub = np.inf
    lb = -np.inf
    sfree = 0.0
    nfree = 0
    for t in range(n):
        yg = y[t] * G[t]
        if beta[t] >= C[t]:
            if y[t] < 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        elif beta[t] <= 0:
            if y[t] > 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        else:
            nfree += 1
            sfree += yg
    if nfree > 0:
        rho = sfree / nfree
    else:
        rho = (ub + lb) / 2.0
    return beta, rho, it


def solve_dual(K, src, y, p, C, tol=1e-3, max_iter=None, shrinking=True):
    """Run SMO; returns ``(beta, rho, iterations)``.

    Decision values are ``sum_i y_i beta_i K[src_i, x] - rho``.
    """
    y = np.ascontiguousarray(y, dtype=float)
    if max_iter is None:
        max_iter = max(10_000_000, 100 * y.shape[0])
    return _solve(np.ascontiguousarray(K, dtype=float),
                  np.ascontiguousarray(src, dtype=np.int64), y,
                  np.ascontiguousarray(p, dtype=float),
                  np.ascontiguousarray(C, dtype=float), float(tol), int(max_iter),
                  bool(shrinking))
