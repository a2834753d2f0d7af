"""Recursive feature elimination with a linear-regression ranking estimator."""

import logging
from dataclasses import dataclass

import numpy as np

from .errors import TargetTooLarge, TargetZero
from .features import DesignMatrix
from .regress.linear import FALLBACK_ALPHA, center, is_rank_deficient, ridge_solve

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RfeResult:
    target_size: int
    selected: tuple  # column indexes, ascending
    elimination_order: tuple
    per_size_subsets: dict  # size -> tuple of column indexes, sizes p..target_size


def _coefficients(Xc, yc):
    if is_rank_deficient(Xc):
        return ridge_solve(Xc, yc, FALLBACK_ALPHA), True
    w, *_ = np.linalg.lstsq(Xc, yc, rcond=None)
    return w, False


def _unpack(X):
    if isinstance(X, DesignMatrix):
        return X.X
    return np.asarray(X, dtype=float)


def _check_standardized(X, tol=0.1):
    var = X.var(axis=0, ddof=1)
    mean = X.mean(axis=0)
    varying = var > 1e-12
    if np.any(varying & ((np.abs(var - 1) > tol) | (np.abs(mean) > tol))):
        raise ValueError("rfe expects standardized columns (mean 0, variance 1)")


def _eliminate(X, y, stop_size):
    X = _unpack(X)
    y = np.asarray(y, dtype=float).reshape(-1)
    _check_standardized(X)
    Xc, yc, _, _ = center(X, y)
    alive = list(range(X.shape[1]))
    subsets = {len(alive): tuple(alive)}
    removed = []
    fallback_fits = 0
    while len(alive) > stop_size:
        w, fell_back = _coefficients(Xc[:, alive], yc)
        fallback_fits += fell_back
        mag = np.abs(w)
        # smallest magnitude; on ties the highest column index goes
        weakest = max(range(len(alive)), key=lambda i: (-mag[i], alive[i]))
        removed.append(alive.pop(weakest))
        subsets[len(alive)] = tuple(alive)
    if fallback_fits:
        logger.warning("rfe: %d of %d fits used the ridge fallback (rank-deficient design)",
                       fallback_fits, len(removed))
    return removed, subsets


def _validate(p, size):
    if size < 1:
        raise TargetZero("target size must be at least 1")
    if size > p:
        raise TargetTooLarge(f"target size {size} exceeds {p} columns")


def _result(size, removed, subsets, p):
    return RfeResult(
        target_size=size,
        selected=subsets[size],
        elimination_order=tuple(removed[: p - size]),
        per_size_subsets={k: v for k, v in subsets.items() if k >= size},
    )


def rfe(X, y, target_size):
    """Backward elimination down to ``target_size`` columns of a standardized matrix.

    Each round fits least squares (ridge fallback on rank deficiency) on the
    surviving columns and drops the one with the smallest absolute coefficient.
    """
    p = _unpack(X).shape[1]
    _validate(p, target_size)
    removed, subsets = _eliminate(X, y, target_size)
    return _result(target_size, removed, subsets, p)


def rfe_sweep(X, y, sizes=range(1, 25)):
    """RFE results for every size in ``sizes`` from a single elimination pass."""
    sizes = sorted(set(int(s) for s in sizes))
    if not sizes:
        raise TargetZero("no target sizes given")
    p = _unpack(X).shape[1]
    _validate(p, sizes[0])
    _validate(p, sizes[-1])
    removed, subsets = _eliminate(X, y, sizes[0])
    return [_result(s, removed, subsets, p) for s in sizes]
