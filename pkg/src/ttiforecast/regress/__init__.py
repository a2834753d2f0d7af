"""The five regression families behind a uniform fit/predict interface.

>>> spec = ModelSpec("ridge", {"alpha": 1.0})
>>> model = fit(spec, [[1.0], [2.0], [3.0]], [2.0, 4.0, 6.0])
>>> predict(model, [[4.0]]).round(3).tolist()
[6.667]
"""

import json
from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidSpec, WidthMismatch
from . import lasso as _lasso
from . import linear as _linear
from . import svr as _svr
from . import tree as _tree

FAMILIES = ("linear", "ridge", "lasso", "svr", "tree")
FORMAT = "ttiforecast-model"
FORMAT_VERSION = 1

_DEFAULTS = {
    "linear": {},
    "ridge": {},
    "lasso": {"tol": 1e-4, "max_iter": 10_000},
    "svr": {"kernel": "rbf", "gamma": None, "epsilon": 0.1},
    "tree": {"min_leaf": 1},
}
_REQUIRED = {
    "linear": (),
    "ridge": ("alpha",),
    "lasso": ("alpha",),
    "svr": ("C",),
    "tree": ("max_depth",),
}


def _is_int(v):
    return isinstance(v, (int, np.integer)) and not isinstance(v, bool)


@dataclass(frozen=True)
class ModelSpec:
    """A regressor family and its hyperparameters.

    ridge/lasso: ``alpha > 0``; svr: ``C > 0``, ``epsilon >= 0``, ``kernel``
    in {linear, rbf} with optional ``gamma``; tree: integer ``max_depth >= 1``
    and ``min_leaf >= 1``.
    """

    family: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidSpec(f"unknown model family {self.family!r}")
        params = dict(_DEFAULTS[self.family])
        params.update(self.params or {})
        for key in _REQUIRED[self.family]:
            if key not in params:
                raise InvalidSpec(f"{self.family} needs parameter {key!r}")
        allowed = set(_DEFAULTS[self.family]) | set(_REQUIRED[self.family])
        unknown = set(params) - allowed
        if unknown:
            raise InvalidSpec(f"unknown {self.family} parameter(s): {sorted(unknown)}")
        f = self.family
        if f in ("ridge", "lasso") and not params["alpha"] > 0:
            raise InvalidSpec("alpha must be > 0")
        if f == "svr":
            if not params["C"] > 0:
                raise InvalidSpec("C must be > 0")
            if not params["epsilon"] >= 0:
                raise InvalidSpec("epsilon must be >= 0")
            if params["kernel"] not in ("linear", "rbf"):
                raise InvalidSpec(f"unknown kernel {params['kernel']!r}")
            if params["gamma"] is not None and not params["gamma"] > 0:
                raise InvalidSpec("gamma must be > 0")
        if f == "tree":
            for key in ("max_depth", "min_leaf"):
                if not _is_int(params[key]) or params[key] < 1:
                    raise InvalidSpec(f"{key} must be an integer >= 1, got {params[key]!r}")
        object.__setattr__(self, "params", params)

    def __hash__(self):
        return hash((self.family, json.dumps(self.params, sort_keys=True)))

    def label(self):
        """Short parameter description in the style of a results table."""
        p = self.params
        if self.family == "linear":
            return "-"
        if self.family in ("ridge", "lasso"):
            return f"alpha={p['alpha']:g}"
        if self.family == "svr":
            return f"C={p['C']:g}, epsilon={p['epsilon']:g}"
        return f"max_depth={p['max_depth']}"

    def public_params(self):
        """Parameters that distinguish grid cells (solver knobs left out)."""
        keys = {"ridge": ("alpha",), "lasso": ("alpha",), "svr": ("C", "epsilon", "kernel"),
                "tree": ("max_depth", "min_leaf"), "linear": ()}[self.family]
        return {k: self.params[k] for k in keys}


@dataclass(frozen=True, eq=False)
class FittedModel:
    spec: ModelSpec
    n_features: int
    state: dict


def fit(spec, X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError(f"X shape {X.shape} does not match {y.shape[0]} targets")
    p = spec.params
    f = spec.family
    if f == "linear":
        w, b = _linear.fit_linear(X, y)
        state = {"weights": w, "intercept": b}
    elif f == "ridge":
        w, b = _linear.fit_ridge(X, y, p["alpha"])
        state = {"weights": w, "intercept": b}
    elif f == "lasso":
        w, b, _ = _lasso.fit_lasso(X, y, p["alpha"], tol=p["tol"], max_iter=p["max_iter"])
        state = {"weights": w, "intercept": b}
    elif f == "svr":
        rows, coef, bias, gamma = _svr.fit_svr(X, y, p["C"], p["epsilon"], p["kernel"], p["gamma"])
        state = {"support": rows, "coef": coef, "bias": bias, "gamma": gamma}
    else:
        state = _tree.fit_tree(X, y, p["max_depth"], p["min_leaf"])
    return FittedModel(spec, X.shape[1], state)


def predict(model, X):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.shape[1] != model.n_features:
        raise WidthMismatch(f"model expects {model.n_features} columns, got {X.shape[1]}")
    s = model.state
    f = model.spec.family
    if f in ("linear", "ridge", "lasso"):
        return X @ s["weights"] + s["intercept"]
    if f == "svr":
        if len(s["coef"]) == 0:
            return np.full(X.shape[0], float(s["bias"]))
        K = _svr.kernel_matrix(X, s["support"], model.spec.params["kernel"], s["gamma"])
        return K @ s["coef"] + s["bias"]
    return _tree.predict_tree(s, X)


def to_dict(model):
    state = {}
    for k, v in model.state.items():
        state[k] = v.tolist() if isinstance(v, np.ndarray) else (None if v is None else float(v))
    return {
        "format": FORMAT,
        "version": FORMAT_VERSION,
        "family": model.spec.family,
        "params": model.spec.params,
        "n_features": model.n_features,
        "state": state,
    }


_INT_STATE = {"feature", "left", "right", "count", "depth"}


def from_dict(doc):
    if doc.get("format") != FORMAT:
        raise ValueError("not a serialized model document")
    if doc.get("version") != FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {doc.get('version')}")
    spec = ModelSpec(doc["family"], doc["params"])
    state = {}
    for k, v in doc["state"].items():
        if isinstance(v, list):
            arr = np.array(v, dtype=np.int64 if k in _INT_STATE else float)
            if k == "support":
                arr = arr.reshape(-1, doc["n_features"])
            state[k] = arr
        else:
            state[k] = v
    return FittedModel(spec, int(doc["n_features"]), state)
