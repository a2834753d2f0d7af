"""Design-matrix construction: calendar numerics, one-hot indicators, weather,
TTI lags, standardization and polynomial expansion."""

import math
from dataclasses import dataclass
from datetime import timedelta
from itertools import combinations_with_replacement

import numpy as np

from .errors import DegreeOutOfRange, ExpansionTooLarge, MissingLag, TooFewRows
from .ingest import WEATHER_COLUMNS

SHORT_TERM = "short_term"
LONG_TERM = "long_term"
CASES = (SHORT_TERM, LONG_TERM)

#: Lag offsets in hours for each prediction case.
LAGS = {
    SHORT_TERM: (1, 2, 3, 4, 5, 6, 24, 48, 72, 168, 336),
    LONG_TERM: (24, 25, 26, 48, 72, 96, 120, 144, 168, 336, 504),
}

CALENDAR_NAMES = ("hour", "day", "weekday", "month", "year")
INDICATOR_NAMES = tuple(
    [f"hour_{h}" for h in range(24)]
    + [f"weekday_{d}" for d in range(7)]
    + [f"month_{m}" for m in range(1, 13)]
)

DEFAULT_EXPANSION_CAP = 20_000
MIN_ROWS = 100


def normalize_case(case):
    aliases = {"short": SHORT_TERM, "long": LONG_TERM}
    case = aliases.get(case, case)
    if case not in CASES:
        raise ValueError(f"unknown case {case!r}")
    return case


@dataclass(frozen=True)
class FeatureSchema:
    names: tuple
    groups: tuple
    case: str

    @classmethod
    def for_case(cls, case):
        case = normalize_case(case)
        lag_names = tuple(f"lag_{h}h" for h in LAGS[case])
        names = CALENDAR_NAMES + INDICATOR_NAMES + WEATHER_COLUMNS + lag_names
        groups = (("calendar",) * 5 + ("indicator",) * 43 + ("weather",) * 34
                  + ("lag",) * 11)
        return cls(names, groups, case)

    def columns(self, group):
        return [i for i, g in enumerate(self.groups) if g == group]


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    """Row-aligned features, target, column names and row timestamps.

    Arrays are stored read-only so a matrix can be shared freely.
    """

    X: np.ndarray
    y: np.ndarray
    names: tuple
    timestamps: tuple = ()
    case: str = None

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        y = np.array(self.y, dtype=float).reshape(-1)
        if X.ndim != 2:
            raise ValueError("X must be 2-D")
        if X.shape[0] != y.shape[0]:
            raise ValueError(f"{X.shape[0]} rows but {y.shape[0]} targets")
        if X.shape[1] != len(self.names):
            raise ValueError(f"width {X.shape[1]} does not match {len(self.names)} names")
        if not (np.isfinite(X).all() and np.isfinite(y).all()):
            raise ValueError("design matrix contains non-finite values")
        if self.timestamps and len(self.timestamps) != X.shape[0]:
            raise ValueError("timestamps not aligned with rows")
        X.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "timestamps", tuple(self.timestamps))

    @property
    def shape(self):
        return self.X.shape

    def take_columns(self, columns):
        columns = list(columns)
        return DesignMatrix(self.X[:, columns], self.y, [self.names[c] for c in columns],
                            self.timestamps, self.case)

    def take_rows(self, rows):
        rows = np.asarray(rows)
        ts = tuple(self.timestamps[i] for i in rows) if self.timestamps else ()
        return DesignMatrix(self.X[rows], self.y[rows], self.names, ts, self.case)

    def to_csv(self, fh):
        fh.write(",".join(("timestamp",) + self.names + ("tti",)) + "\n")
        for i in range(self.X.shape[0]):
            ts = self.timestamps[i].isoformat() if self.timestamps else str(i)
            fh.write(ts + "," + ",".join(repr(float(v)) for v in self.X[i])
                     + f",{float(self.y[i])!r}\n")


def calendar_features(ts):
    """(hour, day of month, weekday with Sunday=0, month, year)."""
    return (ts.hour, ts.day, (ts.weekday() + 1) % 7, ts.month, ts.year)


def indicator_features(ts):
    out = np.zeros(43)
    out[ts.hour] = 1.0
    out[24 + (ts.weekday() + 1) % 7] = 1.0
    out[31 + ts.month - 1] = 1.0
    return out


def lag_features(series, t, case):
    """Values of ``series`` (timestamp -> TTI mapping) at the case's lag offsets before ``t``."""
    out = np.empty(11)
    for i, h in enumerate(LAGS[normalize_case(case)]):
        when = t - timedelta(hours=h)
        try:
            out[i] = series[when]
        except KeyError:
            raise MissingLag(when) from None
    return out


def assemble(records, case):
    """Build the 93-column design matrix for ``case`` from joined records.

    Rows whose lag timestamps are not all present in ``records`` are dropped.
    """
    case = normalize_case(case)
    schema = FeatureSchema.for_case(case)
    series = {r.timestamp: r.tti for r in records}
    offsets = [timedelta(hours=h) for h in LAGS[case]]
    rows, targets, stamps = [], [], []
    for r in records:
        t = r.timestamp
        lags = [series.get(t - off) for off in offsets]
        if any(v is None for v in lags):
            continue
        rows.append(np.concatenate([calendar_features(t), indicator_features(t),
                                    r.weather.indexes, lags]))
        targets.append(r.tti)
        stamps.append(t)
    if len(rows) < MIN_ROWS:
        raise TooFewRows(f"only {len(rows)} rows have full lag history (need {MIN_ROWS})")
    return DesignMatrix(np.array(rows), np.array(targets), schema.names, stamps, case)


# ---------------------------------------------------------------------------
# polynomial expansion

def expansion_width(p, degree):
    return math.comb(p + degree, degree)


def monomials(p, degree):
    """Monomials of total degree <= ``degree`` as tuples of column indexes.

    Ordered by degree, then lexicographically; the empty tuple is the constant.
    """
    out = []
    for d in range(degree + 1):
        out.extend(combinations_with_replacement(range(p), d))
    return out


def _monomial_name(combo, names):
    if not combo:
        return "1"
    parts = []
    for c in sorted(set(combo)):
        k = combo.count(c)
        parts.append(names[c] if k == 1 else f"{names[c]}^{k}")
    return "*".join(parts)


def expand_array(X, degree, cap=DEFAULT_EXPANSION_CAP):
    """Polynomial expansion of a plain array; see :func:`polynomial_expand`."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("X must be 2-D")
    if not (isinstance(degree, (int, np.integer)) and 1 <= degree <= 5):
        raise DegreeOutOfRange(f"degree must be an integer in 1..5, got {degree!r}")
    n, p = X.shape
    width = expansion_width(p, degree)
    if cap is not None and width > cap:
        raise ExpansionTooLarge(width, cap)
    # built column-major: each monomial is a contiguous row of the transpose
    XT = np.ascontiguousarray(X.T)
    outT = np.empty((width, n))
    outT[0] = 1.0
    # degree-d block from the degree-(d-1) block: multiply each monomial by
    # every column index >= its last index
    prev = [((), 0)]
    pos = 1
    for _ in range(degree):
        block = []
        for combo, col in prev:
            first = combo[-1] if combo else 0
            for j in range(first, p):
                np.multiply(outT[col], XT[j], out=outT[pos])
                block.append((combo + (j,), pos))
                pos += 1
        prev = block
    out = outT.T
    return out


def polynomial_expand(matrix, degree, cap=DEFAULT_EXPANSION_CAP):
    """All monomials of total degree <= ``degree``, constant column first.

    For inputs ``[a, b]`` and degree 2 the columns are ``[1, a, b, a^2, a*b, b^2]``.
    Accepts a :class:`DesignMatrix` (returns one, with monomial column names)
    or an array (returns an array).
    """
    if isinstance(matrix, DesignMatrix):
        X = expand_array(matrix.X, degree, cap)
        names = [_monomial_name(c, matrix.names) for c in monomials(len(matrix.names), degree)]
        return DesignMatrix(X, matrix.y, names, matrix.timestamps, matrix.case)
    return expand_array(matrix, degree, cap)


def monomial_gram(A, B, degree):
    """Inner products between the polynomial expansions of rows of ``A`` and ``B``.

    Equal to ``expand_array(A, d) @ expand_array(B, d).T`` without forming the
    expansions: the sum over all monomials of degree j of ``prod (a_i b_i)^k_i``
    is the complete homogeneous symmetric polynomial h_j of the products
    ``a_i b_i``, obtained from power sums by Newton's identity.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    power_sums = [None]
    Ak, Bk = A, B
    for k in range(1, degree + 1):
        if k > 1:
            Ak = Ak * A
            Bk = Bk * B
        power_sums.append(Ak @ Bk.T)
    h = [np.ones((A.shape[0], B.shape[0]))]
    for j in range(1, degree + 1):
        acc = power_sums[1] * h[j - 1]
        for k in range(2, j + 1):
            acc += power_sums[k] * h[j - k]
        h.append(acc / j)
    return sum(h)


# ---------------------------------------------------------------------------
# standardization

@dataclass(frozen=True, eq=False)
class Scaler:
    """Per-column mean and sample standard deviation.

    Columns with zero spread are recorded in ``constant`` and passed through.
    """

    mean: np.ndarray
    scale: np.ndarray
    constant: np.ndarray

    @classmethod
    def fit(cls, X):
        X = np.asarray(X, dtype=float)
        if X.shape[0] < 2:
            raise ValueError("standardization needs at least 2 rows")
        mean = X.mean(axis=0)
        sd = X.std(axis=0, ddof=1)
        # relative test so large-magnitude constant columns are caught too
        constant = sd <= 1e-12 * np.maximum(1.0, np.abs(mean))
        mean = np.where(constant, 0.0, mean)
        scale = np.where(constant, 1.0, sd)
        return cls(mean, scale, constant)

    def apply(self, X):
        return (np.asarray(X, dtype=float) - self.mean) / self.scale

    def invert(self, Z):
        return np.asarray(Z, dtype=float) * self.scale + self.mean


def standardize(matrix):
    """Scale columns to mean 0 and unit sample variance; return ``(scaled, scaler)``."""
    X = matrix.X if isinstance(matrix, DesignMatrix) else matrix
    scaler = Scaler.fit(X)
    Z = scaler.apply(X)
    if isinstance(matrix, DesignMatrix):
        Z = DesignMatrix(Z, matrix.y, matrix.names, matrix.timestamps, matrix.case)
    return Z, scaler


def apply_scaler(scaler, matrix):
    if isinstance(matrix, DesignMatrix):
        return DesignMatrix(scaler.apply(matrix.X), matrix.y, matrix.names,
                            matrix.timestamps, matrix.case)
    return scaler.apply(matrix)


def invert_scaler(scaler, matrix):
    if isinstance(matrix, DesignMatrix):
        return DesignMatrix(scaler.invert(matrix.X), matrix.y, matrix.names,
                            matrix.timestamps, matrix.case)
    return scaler.invert(matrix)
