"""R^2 scoring, k-fold cross-validation and the repeated 1000-row sampling protocol."""

import logging
import warnings
from dataclasses import dataclass

import numpy as np

from . import regress
from .errors import (
    ConstantTarget,
    FoldError,
    InvalidK,
    LengthMismatch,
    SampleTooLarge,
    TtiError,
)
from .features import DEFAULT_EXPANSION_CAP, DesignMatrix, Scaler, expand_array

logger = logging.getLogger(__name__)


def r2_score(y, f):
    """Coefficient of determination ``1 - SS_res / SS_tot``; negative when worse than the mean."""
    y = np.asarray(y, dtype=float).reshape(-1)
    f = np.asarray(f, dtype=float).reshape(-1)
    if y.shape != f.shape:
        raise LengthMismatch(f"{y.shape[0]} actual values vs {f.shape[0]} predictions")
    if y.size == 0:
        raise LengthMismatch("empty input")
    ss_res = float(np.sum((y - f) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        raise ConstantTarget("actual values are constant; R^2 undefined")
    return 1.0 - ss_res / ss_tot


def kfold_split(n, k, seed):
    """Shuffle ``range(n)`` with ``seed`` and cut it into ``k`` folds of near-equal size."""
    if not isinstance(k, (int, np.integer)) or k < 2:
        raise InvalidK(f"k must be an integer >= 2, got {k!r}")
    if n < k:
        raise InvalidK(f"cannot split {n} rows into {k} folds")
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(part) for part in np.array_split(perm, k)]


class Pipeline:
    """Per-fold preprocessing plus model: standardize, expand, (re-standardize), fit.

    The base columns are standardized with training statistics, expanded to
    all monomials up to ``degree`` (constant dropped, the model fits its own
    intercept). Lasso additionally standardizes the expanded columns because
    its penalty assumes unit-variance columns.
    """

    def __init__(self, spec, degree=1, cap=DEFAULT_EXPANSION_CAP):
        self.spec = spec
        self.degree = degree
        self.cap = cap
        self.scaler = None
        self.post_scaler = None
        self.model = None

    def transform(self, X):
        Z = self.scaler.apply(X)
        if self.degree > 1:
            Z = expand_array(Z, self.degree, self.cap)[:, 1:]
        if self.post_scaler is not None:
            Z = self.post_scaler.apply(Z)
        return Z

    def fit(self, X, y):
        self.scaler = Scaler.fit(X)
        Z = self.scaler.apply(X)
        if self.degree > 1:
            Z = expand_array(Z, self.degree, self.cap)[:, 1:]
        if self.spec.family == "lasso" and self.degree > 1:
            self.post_scaler = Scaler.fit(Z)
            Z = self.post_scaler.apply(Z)
        self.model = regress.fit(self.spec, Z, y)
        return self

    def predict(self, X):
        return regress.predict(self.model, self.transform(X))

    def to_dict(self):
        def scaler_doc(s):
            if s is None:
                return None
            return {"mean": s.mean.tolist(), "scale": s.scale.tolist(),
                    "constant": s.constant.tolist()}

        return {"degree": self.degree, "cap": self.cap, "scaler": scaler_doc(self.scaler),
                "post_scaler": scaler_doc(self.post_scaler),
                "model": regress.to_dict(self.model)}

    @classmethod
    def from_dict(cls, doc):
        def scaler(d):
            if d is None:
                return None
            return Scaler(np.array(d["mean"]), np.array(d["scale"]),
                          np.array(d["constant"], dtype=bool))

        model = regress.from_dict(doc["model"])
        out = cls(model.spec, doc["degree"], doc["cap"])
        out.scaler = scaler(doc["scaler"])
        out.post_scaler = scaler(doc["post_scaler"])
        out.model = model
        return out


@dataclass(frozen=True)
class CvScore:
    per_fold: tuple
    mean: float
    sample_seed: int = None
    n_sampled: int = None
    # fitted fold pipelines, kept only on request (for inspection)
    pipelines: tuple = ()


def score_fold(y_true, y_pred, fold=None):
    """R^2 of one validation fold; a constant fold scores 0 with a warning."""
    try:
        return r2_score(y_true, y_pred)
    except ConstantTarget:
        warnings.warn(f"validation fold {fold} has a constant target; scored as 0",
                      RuntimeWarning, stacklevel=2)
        return 0.0


def cross_validate(spec, X, y, k=5, seed=0, degree=1, cap=DEFAULT_EXPANSION_CAP,
                   keep_pipelines=False, sample_seed=None):
    """k-fold CV of ``spec``; preprocessing is fit on the training folds only."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    if X.shape[0] != y.shape[0]:
        raise LengthMismatch(f"{X.shape[0]} rows vs {y.shape[0]} targets")
    folds = kfold_split(X.shape[0], k, seed)
    scores = []
    kept = []
    for i, val in enumerate(folds):
        train = np.setdiff1d(np.arange(X.shape[0]), val, assume_unique=True)
        try:
            pipe = Pipeline(spec, degree, cap).fit(X[train], y[train])
            pred = pipe.predict(X[val])
        except TtiError as exc:
            raise FoldError(i, exc) from exc
        except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
            raise FoldError(i, exc) from exc
        scores.append(score_fold(y[val], pred, i))
        if keep_pipelines:
            kept.append((train, pipe))
    return CvScore(tuple(scores), float(np.mean(scores)), sample_seed, X.shape[0], tuple(kept))


@dataclass(frozen=True)
class RepeatedScore:
    mean: float
    per_repeat: tuple  # of CvScore

    @property
    def repeat_means(self):
        return tuple(s.mean for s in self.per_repeat)


def repeat_seeds(seed, repeat):
    """(sample seed, fold seed) for one repeat, derived from the master seed."""
    sample_seed, fold_seed = np.random.SeedSequence([int(seed), int(repeat)]).generate_state(2)
    return int(sample_seed), int(fold_seed)


def draw_sample(n_rows, sample_size, seed, repeat):
    """Row indexes of one repeat's sample: a seeded permutation's first ``sample_size``."""
    if sample_size > n_rows:
        raise SampleTooLarge(f"sample of {sample_size} from {n_rows} rows")
    sample_seed, fold_seed = repeat_seeds(seed, repeat)
    rows = np.random.default_rng(sample_seed).permutation(n_rows)[:sample_size]
    return rows, sample_seed, fold_seed


def repeated_sampled_cv(matrix, spec, sample_size=1000, repeats=10, k=5, seed=0, degree=1,
                        columns=None, cap=DEFAULT_EXPANSION_CAP):
    """Average of ``repeats`` k-fold CV runs, each on a fresh random sample of rows."""
    X, y = (matrix.X, matrix.y) if isinstance(matrix, DesignMatrix) else matrix
    X = np.asarray(X)
    y = np.asarray(y)
    if columns is not None:
        X = X[:, list(columns)]
    results = []
    for r in range(repeats):
        rows, sample_seed, fold_seed = draw_sample(X.shape[0], sample_size, seed, r)
        results.append(cross_validate(spec, X[rows], y[rows], k, fold_seed, degree, cap,
                                      sample_seed=sample_seed))
    return RepeatedScore(float(np.mean([s.mean for s in results])), tuple(results))
