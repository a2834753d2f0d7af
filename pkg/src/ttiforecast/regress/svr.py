"""Epsilon-insensitive support vector regression solved by SMO.

The dual is written over 2n variables ``a = [alpha; alpha*]`` with signs
``s = [+1; -1]``::

    min  1/2 a'Qa + p'a    s.t.  s'a = 0,  0 <= a <= C
    Q[u, v] = s_u s_v K[u mod n, v mod n],   p = [eps - y; eps + y]

Pairs are chosen with second-order working set selection, as in LIBSVM.
The regression coefficients are ``beta = alpha - alpha*`` and predictions
``f(x) = sum_i beta_i K(x_i, x) + bias``.
"""

import numpy as np
from numba import njit

from ..errors import NotConverged

_TAU = 1e-12


@njit(cache=True)
def _smo(K, C, tol, max_iter, a, G):
    """Run SMO from feasible ``a`` with gradient ``G``; both are updated in place."""
    n = K.shape[0]
    m = 2 * n
    it = 0
    gap = np.inf
    while it < max_iter:
        # i: maximal violator in the "up" set; alpha (sign +1) then alpha* (sign -1)
        g_max = -np.inf
        i = -1
        for u in range(n):
            if a[u] < C and -G[u] >= g_max:
                g_max = -G[u]
                i = u
        for u in range(n, m):
            if a[u] > 0 and G[u] >= g_max:
                g_max = G[u]
                i = u
        if i < 0:
            gap = 0.0
            break
        ki = i if i < n else i - n
        Ki = K[ki]
        kii = Ki[ki]
        g_max2 = -np.inf
        j = -1
        obj_min = np.inf
        for v in range(n):
            if a[v] > 0:
                if G[v] >= g_max2:
                    g_max2 = G[v]
                diff = g_max + G[v]
                if diff > 0:
                    quad = kii + K[v, v] - 2.0 * Ki[v]
                    if quad <= 0:
                        quad = _TAU
                    obj = -diff * diff / quad
                    if obj <= obj_min:
                        j = v
                        obj_min = obj
        for v in range(n, m):
            if a[v] < C:
                kv = v - n
                if -G[v] >= g_max2:
                    g_max2 = -G[v]
                diff = g_max - G[v]
                if diff > 0:
                    quad = kii + K[kv, kv] - 2.0 * Ki[kv]
                    if quad <= 0:
                        quad = _TAU
                    obj = -diff * diff / quad
                    if obj <= obj_min:
                        j = v
                        obj_min = obj
        gap = g_max + g_max2
        if gap < tol or j < 0:
            break
        it += 1

        kj = j if j < n else j - n
        si = 1.0 if i < n else -1.0
        sj = 1.0 if j < n else -1.0
        quad = kii + K[kj, kj] - 2.0 * Ki[kj]
        if quad <= 0:
            quad = _TAU
        old_i = a[i]
        old_j = a[j]
        if si != sj:
            delta = (-G[i] - G[j]) / quad
            diff = a[i] - a[j]
            a[i] += delta
            a[j] += delta
            if diff > 0:
                if a[j] < 0:
                    a[j] = 0.0
                    a[i] = diff
                if a[i] > C:
                    a[i] = C
                    a[j] = C - diff
            else:
                if a[i] < 0:
                    a[i] = 0.0
                    a[j] = -diff
                if a[j] > C:
                    a[j] = C
                    a[i] = C + diff
        else:
            delta = (G[i] - G[j]) / quad
            total = a[i] + a[j]
            a[i] -= delta
            a[j] += delta
            if total > C:
                if a[i] > C:
                    a[i] = C
                    a[j] = total - C
                if a[j] > C:
                    a[j] = C
                    a[i] = total - C
            else:
                if a[j] < 0:
                    a[j] = 0.0
                    a[i] = total
                if a[i] < 0:
                    a[i] = 0.0
                    a[j] = total

        # change in beta = alpha - alpha* at the two kernel rows
        db_i = si * (a[i] - old_i)
        db_j = sj * (a[j] - old_j)
        Kj = K[kj]
        for u in range(n):
            d = Ki[u] * db_i + Kj[u] * db_j
            G[u] += d
            G[u + n] -= d

    # bias from free variables, else midpoint of the feasible interval
    ub = np.inf
    lb = -np.inf
    free_sum = 0.0
    n_free = 0
    for u in range(m):
        sg = 1.0 if u < n else -1.0
        yg = sg * G[u]
        if a[u] >= C:
            if sg < 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        elif a[u] <= 0:
            if sg > 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        else:
            n_free += 1
            free_sum += yg
    rho = free_sum / n_free if n_free > 0 else (ub + lb) / 2.0
    return -rho, it, gap


def rbf_gamma(X):
    """Default RBF width: ``1 / (p * mean column variance)``."""
    X = np.asarray(X, dtype=float)
    mean_var = float(X.var(axis=0).mean()) if X.size else 0.0
    return 1.0 / (X.shape[1] * mean_var) if mean_var > 0 else 1.0


def kernel_matrix(A, B, kernel, gamma=None):
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    G = A @ B.T
    if kernel == "linear":
        return G
    if kernel == "rbf":
        sq = (A * A).sum(axis=1)[:, None] + (B * B).sum(axis=1)[None, :] - 2.0 * G
        return np.exp(-gamma * np.maximum(sq, 0.0))
    raise ValueError(f"unknown kernel {kernel!r}")


def solve_dual(K, y, C, epsilon, tol=1e-3, max_iter=None, start=None):
    """SMO on a precomputed kernel matrix. Returns ``(beta, bias, iterations)``.

    ``start`` may be a previous ``beta`` (any point with ``|beta_i| <= C`` and
    ``sum(beta) = 0`` is feasible), which usually saves most iterations when
    sweeping C or epsilon.
    """
    K = np.ascontiguousarray(K, dtype=float)
    y = np.asarray(y, dtype=float)
    n = y.shape[0]
    if max_iter is None:
        max_iter = max(10_000_000, 100 * n)
    a = np.zeros(2 * n)
    if start is not None:
        start = np.clip(np.asarray(start, dtype=float), -C, C)
        if abs(start.sum()) > 1e-9 * max(1.0, C):
            start = None
        else:
            a[:n] = np.maximum(start, 0.0)
            a[n:] = np.maximum(-start, 0.0)
    Kb = K @ (a[:n] - a[n:]) if start is not None else np.zeros(n)
    G = np.concatenate([epsilon - y + Kb, epsilon + y - Kb])
    bias, it, gap = _smo(K, float(C), float(tol), int(max_iter), a, G)
    if gap >= tol and it >= max_iter:
        raise NotConverged(it, gap)
    return a[:n] - a[n:], bias, it


def dual_objective(K, y, beta, epsilon):
    """Value of ``1/2 b'Kb - y'b + eps |b|_1`` (the minimized dual in ``beta``)."""
    return float(0.5 * beta @ K @ beta - y @ beta + epsilon * np.abs(beta).sum())


def fit_svr(X, y, C, epsilon, kernel="rbf", gamma=None, tol=1e-3):
    """Returns ``(support_rows, support_coef, bias, gamma)``."""
    if C <= 0:
        raise ValueError("C must be > 0")
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    X = np.asarray(X, dtype=float)
    if kernel == "rbf" and gamma is None:
        gamma = rbf_gamma(X)
    K = kernel_matrix(X, X, kernel, gamma)
    beta, bias, _ = solve_dual(K, y, C, epsilon, tol)
    support = beta != 0
    return X[support], beta[support], bias, gamma
