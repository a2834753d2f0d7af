"""Lasso by cyclic coordinate descent.

Objective: ``(1/2n) ||y - Xw - b||^2 + alpha ||w||_1`` with unpenalized ``b``.
Columns are expected to be standardized by the caller.
"""

import numpy as np
from numba import njit

from ..errors import NotConverged
from .linear import center

_MIN_ENTER = 20


@njit(cache=True)
def _soft(z, t):
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


@njit(cache=True)
def _settle(XT, r, w, col_sq, active, alpha, tol, max_sweeps):
    """Cyclic coordinate descent over the ``active`` columns until no update exceeds ``tol``."""
    n = XT.shape[1]
    change = np.inf
    sweeps = 0
    while sweeps < max_sweeps:
        change = 0.0
        for j in active:
            xj = XT[j]
            wj = w[j]
            rho = 0.0
            for i in range(n):
                rho += xj[i] * r[i]
            rho = rho / n + col_sq[j] * wj
            new = _soft(rho, alpha) / col_sq[j]
            if new != wj:
                d = new - wj
                for i in range(n):
                    r[i] -= xj[i] * d
                w[j] = new
                if abs(d) > change:
                    change = abs(d)
        sweeps += 1
        if change < tol:
            break
    return sweeps, change


def _coordinate_descent(XT, y, w, alpha, tol, max_iter, col_sq=None):
    """Active-set coordinate descent.

    Columns at zero are checked with one matrix-vector product: a zero
    coefficient stays zero under a coordinate update exactly when its
    correlation with the residual is at most ``alpha``. Only violators join
    the active set, at most ``max(_MIN_ENTER, 2 * |nonzero|)`` of the
    strongest per round, so each outer round costs one product plus inner
    sweeps over a small working set.
    """
    n = XT.shape[1]
    if col_sq is None:
        col_sq = np.einsum("ij,ij->i", XT, XT) / n
    usable = col_sq > 0
    r = y - XT.T @ w
    sweeps = 0
    change = np.inf
    while sweeps < max_iter:
        grad = np.abs(XT @ r) / n
        # violations below tol are left alone (the final KKT check allows 10 * tol)
        entering = np.flatnonzero(usable & (w == 0) & (grad > alpha + tol))
        if entering.size == 0 and change < tol:
            break
        # admit only the strongest violators; the rest are rechecked next round
        held = np.flatnonzero(w != 0)
        limit = max(_MIN_ENTER, 2 * held.size)
        if entering.size > limit:
            entering = entering[np.argpartition(grad[entering], -limit)[-limit:]]
        active = np.union1d(held, entering)
        if active.size == 0:
            change = 0.0
            break
        # settle the working set tightly so the next gradient check is reliable
        done, change = _settle(XT, r, w, col_sq, active, alpha, 0.1 * tol, max_iter - sweeps)
        sweeps += done
    return sweeps, change


def kkt_violation(Xc, yc, w, alpha):
    """Largest violation of the lasso optimality conditions on centered data."""
    n = Xc.shape[0]
    grad = Xc.T @ (yc - Xc @ w) / n
    zero = w == 0
    viol = np.where(zero, np.maximum(np.abs(grad) - alpha, 0.0), np.abs(grad - alpha * np.sign(w)))
    return float(viol.max(initial=0.0))


def check_standardized(X, tol=0.1):
    var = np.asarray(X).var(axis=0, ddof=1)
    varying = var > 1e-12
    bad = varying & (np.abs(var - 1.0) > tol)
    if bad.any():
        raise ValueError(
            f"lasso expects standardized columns; {int(bad.sum())} column(s) have variance "
            f"outside 1 +/- {tol}")


def lasso_path(X, y, alphas, tol=1e-4, max_iter=10_000, intercept=True, check=True):
    """Fits for several alphas, largest first, each warm-started from the last.

    Centering and column norms are computed once. Returns a list of
    ``(weights, intercept, sweeps)`` in the order of ``alphas``.
    """
    alphas = [float(a) for a in alphas]
    if any(a <= 0 for a in alphas):
        raise ValueError("alpha must be > 0")
    if check:
        check_standardized(X)
    Xc, yc, x_mean, y_mean = center(X, y, intercept)
    XT = np.ascontiguousarray(Xc.T)
    yc = np.ascontiguousarray(yc)
    col_sq = np.einsum("ij,ij->i", XT, XT) / XT.shape[1]
    w = np.zeros(XT.shape[0])
    fits = {}
    for alpha in sorted(set(alphas), reverse=True):
        w = w.copy()
        sweeps, change = _coordinate_descent(XT, yc, w, alpha, float(tol), int(max_iter), col_sq)
        if change >= tol:
            raise NotConverged(sweeps, change)
        violation = kkt_violation(Xc, yc, w, alpha)
        if violation > 10 * tol:
            raise NotConverged(sweeps, violation)
        fits[alpha] = (w, y_mean - float(x_mean @ w), sweeps)
    return [fits[a] for a in alphas]


def fit_lasso(X, y, alpha, tol=1e-4, max_iter=10_000, intercept=True, warm_start=None,
              check=True):
    """Returns ``(weights, intercept, sweeps)``.

    Converges when a full sweep changes no coefficient by more than ``tol``;
    the KKT conditions are then verified at ``10 * tol``.
    """
    if alpha <= 0:
        raise ValueError("alpha must be > 0")
    if check:
        check_standardized(X)
    Xc, yc, x_mean, y_mean = center(X, y, intercept)
    XT = np.ascontiguousarray(Xc.T)
    w = np.zeros(Xc.shape[1]) if warm_start is None else np.array(warm_start, dtype=float)
    sweeps, change = _coordinate_descent(XT, np.ascontiguousarray(yc), w, float(alpha),
                                         float(tol), int(max_iter))
    if change >= tol:
        raise NotConverged(sweeps, change)
    violation = kkt_violation(Xc, yc, w, alpha)
    if violation > 10 * tol:
        raise NotConverged(sweeps, violation)
    return w, y_mean - float(x_mean @ w), sweeps
