"""Ordinary least squares and ridge regression with an unpenalized intercept."""

import warnings

import numpy as np

from ..errors import RankDeficient

#: Penalty used when OLS meets a rank-deficient design.
FALLBACK_ALPHA = 1e-10


def center(X, y, intercept=True):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if not intercept:
        return X, y, np.zeros(X.shape[1]), 0.0
    x_mean = X.mean(axis=0)
    y_mean = float(y.mean())
    return X - x_mean, y - y_mean, x_mean, y_mean


def ridge_solve(Xc, yc, alpha):
    """Solve ``(Xc'Xc + alpha I) w = Xc'yc`` in primal or dual form, whichever is smaller."""
    n, p = Xc.shape
    if p <= n:
        A = Xc.T @ Xc
        A[np.diag_indices_from(A)] += alpha
        return np.linalg.solve(A, Xc.T @ yc)
    K = Xc @ Xc.T
    K[np.diag_indices_from(K)] += alpha
    return Xc.T @ np.linalg.solve(K, yc)


def is_rank_deficient(Xc):
    if Xc.shape[1] == 0:
        return False
    s = np.linalg.svd(Xc, compute_uv=False)
    tol = s.max(initial=0.0) * max(Xc.shape) * np.finfo(float).eps
    return int((s > tol).sum()) < Xc.shape[1]


def fit_linear(X, y, intercept=True, fallback=True):
    """Least squares fit. Returns ``(weights, intercept)``.

    A rank-deficient design is solved as ridge with ``FALLBACK_ALPHA`` and a
    warning, or raises :class:`RankDeficient` when ``fallback`` is off.
    """
    Xc, yc, x_mean, y_mean = center(X, y, intercept)
    if is_rank_deficient(Xc):
        if not fallback:
            raise RankDeficient(f"design of shape {Xc.shape} is rank deficient")
        warnings.warn("rank-deficient design; using ridge fallback", RuntimeWarning, stacklevel=2)
        w = ridge_solve(Xc, yc, FALLBACK_ALPHA)
    else:
        w, *_ = np.linalg.lstsq(Xc, yc, rcond=None)
    return w, y_mean - float(x_mean @ w)


def fit_ridge(X, y, alpha, intercept=True):
    """Minimize ``||y - Xw - b||^2 + alpha ||w||^2``. Returns ``(weights, intercept)``."""
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    if alpha == 0:
        return fit_linear(X, y, intercept)
    Xc, yc, x_mean, y_mean = center(X, y, intercept)
    w = ridge_solve(Xc, yc, alpha)
    return w, y_mean - float(x_mean @ w)


def ridge_objective(X, y, w, b, alpha):
    r = np.asarray(y) - np.asarray(X) @ w - b
    return float(r @ r + alpha * (w @ w))


def ridge_gradient(X, y, w, b, alpha):
    """Gradient of :func:`ridge_objective` with respect to ``w``."""
    X = np.asarray(X)
    return 2.0 * X.T @ (X @ w + b - np.asarray(y)) + 2.0 * alpha * w
