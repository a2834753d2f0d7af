"""Grid search over model family x parameters x subset size x polynomial degree.

Every grid cell is scored with the repeated-sampling protocol of
:mod:`ttiforecast.evaluate`. Samples and folds depend only on the master seed
and the repeat number, so all cells see the same rows (common random
numbers), one RFE sweep per sample serves every cell, and the work for one
(subset size, degree, repeat, fold) unit is shared across all model
parameters. Serial and parallel runs give identical numbers.
"""

import csv
import itertools
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import evaluate
from .errors import MissingFamily, TtiError
from .features import (
    CASES,
    DEFAULT_EXPANSION_CAP,
    Scaler,
    expand_array,
    expansion_width,
    monomial_gram,
    normalize_case,
    standardize,
)
from .regress import FAMILIES, ModelSpec
from .regress import lasso as _lasso
from .regress import linear as _linear
from .regress import svr as _svr
from .regress import tree as _tree
from .selection import rfe_sweep

logger = logging.getLogger(__name__)

MODEL_NAMES = {
    "ridge": "Ridge Regression",
    "linear": "Linear Regression",
    "svr": "SVR",
    "tree": "Decision Tree Regressor",
    "lasso": "Lasso Regression",
}

DEFAULT_FAMILIES = {
    "linear": {},
    "ridge": {"alpha": [0.01, 0.1, 0.19, 0.5, 1.0, 1.9, 5, 10]},
    "lasso": {"alpha": [0.01, 0.1, 0.19, 0.5, 1.0, 1.9, 5, 10]},
    "svr": {"C": [0.5, 1.0, 1.6, 2.8, 5], "epsilon": [0.05, 0.1, 0.2]},
    "tree": {"max_depth": [1, 2, 3, 5, 8]},
}


@dataclass
class GridConfig:
    case: str = "short_term"
    families: dict = field(default_factory=lambda: json.loads(json.dumps(DEFAULT_FAMILIES)))
    sizes: list = field(default_factory=lambda: list(range(1, 25)))
    degrees: list = field(default_factory=lambda: [1, 2, 3, 4, 5])
    sample_size: int = 1000
    repeats: int = 10
    k: int = 5
    seed: int = 0
    cap: int = DEFAULT_EXPANSION_CAP

    def __post_init__(self):
        self.case = normalize_case(self.case)
        if not self.families:
            raise ValueError("no model families configured")
        for fam, ranges in self.families.items():
            if fam not in FAMILIES:
                raise ValueError(f"unknown family {fam!r}")
            for key, values in ranges.items():
                if not isinstance(values, list) or not values:
                    raise ValueError(f"{fam}.{key} must be a non-empty list")
        if not self.sizes or not set(self.sizes) <= set(range(1, 25)):
            raise ValueError("sizes must be a non-empty subset of 1..24")
        if not self.degrees or not set(self.degrees) <= set(range(1, 6)):
            raise ValueError("degrees must be a non-empty subset of 1..5")
        self.sizes = sorted(set(self.sizes))
        self.degrees = sorted(set(self.degrees))

    def specs(self):
        """All model specs in configuration order."""
        out = []
        for fam, ranges in self.families.items():
            keys = list(ranges)
            for combo in itertools.product(*(ranges[k] for k in keys)):
                out.append(ModelSpec(fam, dict(zip(keys, combo))))
        return out

    def cells(self):
        return [(spec, size, degree) for spec in self.specs()
                for size in self.sizes for degree in self.degrees]

    @classmethod
    def from_json(cls, text, **overrides):
        doc = json.loads(text)
        doc.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**doc)

    def to_json(self):
        return json.dumps(asdict(self), indent=2)


@dataclass(frozen=True)
class ExperimentResult:
    case: str
    family: str
    params: dict
    n_features: int
    degree: int
    mean_score: float
    per_repeat: tuple
    seconds: float


@dataclass(frozen=True)
class SkippedCell:
    case: str
    family: str
    params: dict
    n_features: int
    degree: int
    reason: str


class GridResults(list):
    """Scored cells (a list of :class:`ExperimentResult`) plus the cells that were not scored."""

    def __init__(self, results=(), skipped=()):
        super().__init__(results)
        self.skipped = list(skipped)


# ---------------------------------------------------------------------------
# shared per-fold evaluation


def _center_gram(K_tr, K_va):
    """Center a training Gram matrix and the validation-vs-training block on training means."""
    col = K_tr.mean(axis=0)
    grand = col.mean()
    Kc = K_tr - col[None, :] - col[:, None] + grand
    Kvc = K_va - col[None, :] - K_va.mean(axis=1)[:, None] + grand
    return Kc, Kvc


class _Fold:
    """Lazily built representations of one fold's training/validation rows."""

    def __init__(self, A_tr, y_tr, A_va, degree, cap):
        self.A_tr, self.y_tr, self.A_va = A_tr, y_tr, A_va
        self.degree = degree
        self.cap = cap
        self.width = expansion_width(A_tr.shape[1], degree) - 1
        self._phi = None
        self._gram = None

    def phi(self):
        if self._phi is None:
            if self.degree == 1:
                self._phi = (self.A_tr, self.A_va)
            else:
                self._phi = (expand_array(self.A_tr, self.degree, self.cap)[:, 1:],
                             expand_array(self.A_va, self.degree, self.cap)[:, 1:])
        return self._phi

    def gram(self):
        if self._gram is None:
            A = np.vstack([self.A_tr, self.A_va])
            K = monomial_gram(A, A, self.degree)
            n = self.A_tr.shape[0]
            self._gram = (K[:n, :n], K[n:, :n], np.diag(K))
        return self._gram


def _ridge_family(fold, alphas):
    """Validation predictions for each ridge penalty (0 means least squares)."""
    y = fold.y_tr
    y_mean = y.mean()
    yc = y - y_mean
    n = len(y)
    out = {}
    if fold.width <= n:
        P_tr, P_va = fold.phi()
        mu = P_tr.mean(axis=0)
        U, s, Vt = np.linalg.svd(P_tr - mu, full_matrices=False)
        uty = U.T @ yc
        Pv = P_va - mu
        tol = s.max(initial=0.0) * max(P_tr.shape) * np.finfo(float).eps
        full_rank = int((s > tol).sum()) == P_tr.shape[1]
        for a in alphas:
            if a == 0 and full_rank:
                w, *_ = np.linalg.lstsq(P_tr - mu, yc, rcond=None)
            else:
                a_eff = a if a > 0 else _linear.FALLBACK_ALPHA
                w = Vt.T @ (s / (s * s + a_eff) * uty)
            out[a] = Pv @ w + y_mean
        return out
    K_tr, K_va, _ = fold.gram()
    Kc, Kvc = _center_gram(K_tr, K_va)
    lam, Q = np.linalg.eigh(Kc)
    lam = np.maximum(lam, 0.0)
    qty = Q.T @ yc
    KvQ = Kvc @ Q
    for a in alphas:
        a_eff = a if a > 0 else _linear.FALLBACK_ALPHA  # width > n rows: always rank deficient
        out[a] = KvQ @ (qty / (lam + a_eff)) + y_mean
    return out


def _svr_family(fold, settings):
    K_tr, K_va, diag = fold.gram()
    n = K_tr.shape[0]
    Kc, _ = _center_gram(K_tr, K_va)
    total_var = np.trace(Kc) / n
    gamma = 1.0 / total_var if total_var > 0 else 1.0
    d_tr, d_va = diag[:n], diag[n:]
    R_tr = np.exp(-gamma * np.maximum(d_tr[:, None] + d_tr[None, :] - 2 * K_tr, 0.0))
    R_va = np.exp(-gamma * np.maximum(d_va[:, None] + d_tr[None, :] - 2 * K_va, 0.0))
    out = {}
    beta = None
    # increasing C keeps the previous solution feasible, so warm-start along the sweep
    for C, eps in sorted(settings, key=lambda ce: (ce[0], -ce[1])):
        beta, bias, _ = _svr.solve_dual(R_tr, fold.y_tr, C, eps, start=beta)
        out[(C, eps)] = R_va @ beta + bias
    return out


def _lasso_family(fold, alphas):
    P_tr, P_va = fold.phi()
    if fold.degree > 1:
        sc = Scaler.fit(P_tr)
        P_tr, P_va = sc.apply(P_tr), sc.apply(P_va)
    fits = _lasso.lasso_path(P_tr, fold.y_tr, alphas, check=False)
    return {a: P_va @ w + b for a, (w, b, _) in zip(alphas, fits)}


def _tree_family(fold, depths, min_leaf):
    P_tr, P_va = fold.phi()
    nodes = _tree.fit_tree(P_tr, fold.y_tr, max(depths), min_leaf)
    return {d: _tree.predict_tree(nodes, P_va, d) for d in depths}


def _family_predictions(fold, family, specs):
    """Predictions on the validation rows for each spec of one family, keyed by spec."""
    if family in ("linear", "ridge"):
        alphas = [s.params.get("alpha", 0.0) for s in specs]  # least squares is alpha 0
        preds = _ridge_family(fold, sorted(set(alphas)))
        return {s: preds[a] for s, a in zip(specs, alphas)}
    if family == "lasso":
        preds = _lasso_family(fold, sorted({s.params["alpha"] for s in specs}))
        return {s: preds[s.params["alpha"]] for s in specs}
    if family == "svr":
        out = {}
        rbf = [s for s in specs if s.params["kernel"] == "rbf" and s.params["gamma"] is None]
        if rbf:
            preds = _svr_family(fold, sorted({(s.params["C"], s.params["epsilon"]) for s in rbf}))
            out.update({s: preds[(s.params["C"], s.params["epsilon"])] for s in rbf})
        for s in specs:
            if s not in out:
                out[s] = _generic(fold, s)
        return out
    out = {}
    by_leaf = {}
    for s in specs:
        by_leaf.setdefault(s.params["min_leaf"], []).append(s)
    for min_leaf, group in by_leaf.items():
        preds = _tree_family(fold, sorted({s.params["max_depth"] for s in group}), min_leaf)
        out.update({s: preds[s.params["max_depth"]] for s in group})
    return out


def _generic(fold, spec):
    from . import regress

    P_tr, P_va = fold.phi()
    if spec.family == "lasso" and fold.degree > 1:
        sc = Scaler.fit(P_tr)
        P_tr, P_va = sc.apply(P_tr), sc.apply(P_va)
    return regress.predict(regress.fit(spec, P_tr, fold.y_tr), P_va)


def _run_block(args):
    """Score every spec for one (subset size, degree) over all repeats and folds."""
    samples, subsets, size, degree, specs, k, cap = args
    by_family = {}
    for s in specs:
        # least squares rides on the ridge decomposition
        by_family.setdefault("ridge" if s.family == "linear" else s.family, []).append(s)
    scores = {s: [[] for _ in samples] for s in specs}
    seconds = {s: 0.0 for s in specs}
    errors = {}
    for r, (X, y, fold_seed) in enumerate(samples):
        cols = list(subsets[r][size])
        Xs = X[:, cols]
        for i, val in enumerate(evaluate.kfold_split(len(y), k, fold_seed)):
            train = np.setdiff1d(np.arange(len(y)), val, assume_unique=True)
            scaler = Scaler.fit(Xs[train])
            fold = _Fold(scaler.apply(Xs[train]), y[train], scaler.apply(Xs[val]), degree, cap)
            for family, group in by_family.items():
                live = [s for s in group if s not in errors]
                if not live:
                    continue
                t0 = time.perf_counter()
                try:
                    preds = _family_predictions(fold, family, live)
                except (TtiError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
                    for s in live:
                        errors[s] = f"repeat {r} fold {i}: {exc}"
                    continue
                share = (time.perf_counter() - t0) / len(live)
                for s in live:
                    scores[s][r].append(evaluate.score_fold(y[val], preds[s], i))
                    seconds[s] += share
    return size, degree, scores, seconds, errors


def _prepare_samples(matrix, config):
    """Per-repeat sampled rows, fold seeds and RFE subsets for every size."""
    samples, subsets = [], []
    for r in range(config.repeats):
        rows, _, fold_seed = evaluate.draw_sample(matrix.X.shape[0], config.sample_size,
                                                  config.seed, r)
        X = np.ascontiguousarray(matrix.X[rows])
        y = np.ascontiguousarray(matrix.y[rows])
        Z, _ = standardize(X)
        sweep = rfe_sweep(Z, y, config.sizes)
        samples.append((X, y, fold_seed))
        subsets.append({res.target_size: res.selected for res in sweep})
    return samples, subsets


def run_grid(matrix, config, workers=1, progress=None):
    """Score every configured cell; returns :class:`GridResults` in configuration order.

    Cells whose polynomial expansion exceeds ``config.cap`` columns, and
    cells whose fits fail, are listed in ``.skipped`` instead of aborting.
    """
    if matrix.case is not None and matrix.case != config.case:
        raise ValueError(f"matrix built for {matrix.case}, config is for {config.case}")
    specs = config.specs()
    samples, subsets = _prepare_samples(matrix, config)
    blocks = []
    skipped = {}
    for size in config.sizes:
        for degree in config.degrees:
            width = expansion_width(size, degree)
            if width > config.cap:
                for s in specs:
                    skipped[(s, size, degree)] = (
                        f"expanded width {width} exceeds cap {config.cap}")
                continue
            blocks.append((samples, subsets, size, degree, specs, config.k, config.cap))

    outcome = {}
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for done, res in enumerate(pool.map(_run_block, blocks), 1):
                outcome[res[:2]] = res
                if progress:
                    progress(done, len(blocks))
    else:
        for done, block in enumerate(blocks, 1):
            res = _run_block(block)
            outcome[res[:2]] = res
            if progress:
                progress(done, len(blocks))

    results = GridResults()
    for spec, size, degree in config.cells():
        key = (spec, size, degree)
        cell = dict(case=config.case, family=spec.family, params=spec.public_params(),
                    n_features=size, degree=degree)
        if key in skipped:
            results.skipped.append(SkippedCell(**cell, reason=skipped[key]))
            continue
        _, _, scores, seconds, errors = outcome[(size, degree)]
        if spec in errors:
            results.skipped.append(SkippedCell(**cell, reason=f"failed: {errors[spec]}"))
            continue
        per_repeat = tuple(float(np.mean(f)) for f in scores[spec])
        results.append(ExperimentResult(**cell, mean_score=float(np.mean(per_repeat)),
                                        per_repeat=per_repeat, seconds=seconds[spec]))
    return results


# ---------------------------------------------------------------------------
# summaries and files

@dataclass(frozen=True)
class SummaryRow:
    model: str
    family: str
    best_parameters: str
    n_variables: int
    degree: int
    best_score: float


def _params_label(family, params):
    return ModelSpec(family, params).label()


def best_per_model(results, families=FAMILIES):
    """Best cell per family, rows sorted by score (ties: fewer variables, then lower degree)."""
    best = {}
    for res in results:
        if isinstance(res, SkippedCell) or not math.isfinite(res.mean_score):
            continue
        key = (-res.mean_score, res.n_features, res.degree)
        if res.family not in best or key < best[res.family][0]:
            best[res.family] = (key, res)
    missing = [f for f in families if f not in best]
    if missing:
        raise MissingFamily(f"no scored results for: {', '.join(missing)}")
    rows = [SummaryRow(MODEL_NAMES[f], f, _params_label(f, r.params), r.n_features,
                       r.degree, r.mean_score) for f, (_, r) in best.items()]
    rows.sort(key=lambda row: (-row.best_score, row.n_variables, row.degree))
    return rows


RESULT_FIELDS = ("case", "family", "params", "n_features", "degree", "mean_score", "seconds",
                 "per_repeat")


def write_results_csv(results, fh):
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(RESULT_FIELDS)
    for r in results:
        writer.writerow([r.case, r.family, json.dumps(r.params, sort_keys=True), r.n_features,
                         r.degree, repr(r.mean_score), f"{r.seconds:.4f}",
                         json.dumps(list(r.per_repeat))])


def read_results_csv(fh):
    out = []
    for row in csv.DictReader(fh):
        per_repeat = tuple(json.loads(row["per_repeat"])) if row.get("per_repeat") else ()
        out.append(ExperimentResult(row["case"], row["family"], json.loads(row["params"]),
                                    int(row["n_features"]), int(row["degree"]),
                                    float(row["mean_score"]), per_repeat, float(row["seconds"])))
    return out


SUMMARY_HEADER = ("Model", "Best parameters", "# Variables", "Degree", "Best score (R2)")


def summary_cells(row):
    return [row.model, row.best_parameters, row.n_variables, row.degree, f"{row.best_score:.4f}"]


def write_summary_csv(rows, fh):
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(SUMMARY_HEADER)
    for row in rows:
        writer.writerow(summary_cells(row))


def summary_markdown(rows, title=None):
    lines = []
    if title:
        lines += [f"### {title}", ""]
    lines += ["| Model | Best parameters | # Variables | Degree | Best score (R²) |",
              "|---|---|---:|---:|---:|"]
    for row in rows:
        lines.append(f"| {row.model} | {row.best_parameters} | {row.n_variables} | "
                     f"{row.degree} | {row.best_score:.4f} |")
    return "\n".join(lines) + "\n"
