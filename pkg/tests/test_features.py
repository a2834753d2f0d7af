import itertools
import math
from datetime import datetime, timedelta

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import weather_day
from ttiforecast.errors import DegreeOutOfRange, ExpansionTooLarge, MissingLag, TooFewRows
from ttiforecast.features import (
    LAGS,
    DesignMatrix,
    FeatureSchema,
    Scaler,
    apply_scaler,
    assemble,
    calendar_features,
    expand_array,
    expansion_width,
    indicator_features,
    invert_scaler,
    lag_features,
    monomial_gram,
    monomials,
    polynomial_expand,
    standardize,
)
from ttiforecast.ingest import JoinedRecord


def zeller_sunday_first(y, m, d):
    """Weekday with Sunday=0 by Zeller's congruence (independent of datetime)."""
    if m < 3:
        m += 12
        y -= 1
    k, j = y % 100, y // 100
    h = (d + (13 * (m + 1)) // 5 + k + k // 4 + j // 4 + 5 * j) % 7  # 0 = Saturday
    return (h + 6) % 7


# --- schema ---------------------------------------------------------------------

@pytest.mark.parametrize("case", ["short_term", "long_term"])
def test_schema_layout(case):
    s = FeatureSchema.for_case(case)
    assert len(s.names) == 93 == len(set(s.names))
    counts = {g: s.groups.count(g) for g in set(s.groups)}
    assert counts == {"calendar": 5, "indicator": 43, "weather": 34, "lag": 11}
    ind = [s.names[i] for i in s.columns("indicator")]
    assert sum(n.startswith("hour_") for n in ind) == 24
    assert sum(n.startswith("weekday_") for n in ind) == 7
    assert sum(n.startswith("month_") for n in ind) == 12


def test_lag_sets():
    assert LAGS["short_term"] == (1, 2, 3, 4, 5, 6, 24, 48, 72, 168, 336)
    assert LAGS["long_term"] == (24, 25, 26, 48, 72, 96, 120, 144, 168, 336, 504)
    assert min(LAGS["long_term"]) >= 24
    assert {1, 2, 3} <= set(LAGS["short_term"])


# --- calendar and indicators ---------------------------------------------------------

@pytest.mark.parametrize("ts, expected", [
    (datetime(2010, 1, 1, 8), (8, 1, 5, 1, 2010)),
    (datetime(2015, 12, 31, 23), (23, 31, 4, 12, 2015)),
    (datetime(2013, 1, 1, 0), (0, 1, 2, 1, 2013)),
])
def test_calendar_examples(ts, expected):
    assert calendar_features(ts) == expected
    assert expected[2] == zeller_sunday_first(ts.year, ts.month, ts.day)


@settings(max_examples=200, deadline=None)
@given(st.datetimes(min_value=datetime(1901, 1, 1), max_value=datetime(2099, 12, 31)))
def test_weekday_matches_zeller(ts):
    ts = ts.replace(minute=0, second=0, microsecond=0)
    hour, day, weekday, month, year = calendar_features(ts)
    assert weekday == zeller_sunday_first(ts.year, ts.month, ts.day)
    assert (hour, day, month, year) == (ts.hour, ts.day, ts.month, ts.year)


@settings(max_examples=200, deadline=None)
@given(st.datetimes(min_value=datetime(2000, 1, 1), max_value=datetime(2030, 12, 31)))
def test_indicators_one_hot(ts):
    v = indicator_features(ts)
    assert v.shape == (43,) and v.sum() == 3
    assert set(np.unique(v)) <= {0.0, 1.0}
    hour, _, weekday, month, _ = calendar_features(ts)
    assert v[hour] == v[24 + weekday] == v[31 + month - 1] == 1


def test_wednesday_in_june_at_eight():
    v = indicator_features(datetime(2015, 6, 3, 8))
    names = FeatureSchema.for_case("short").names[5:48]
    assert [names[i] for i in np.flatnonzero(v)] == ["hour_8", "weekday_3", "month_6"]


def test_same_calendar_slot_same_vector():
    a = indicator_features(datetime(2015, 6, 3, 8))
    b = indicator_features(datetime(2015, 6, 10, 8))
    assert np.array_equal(a, b)


# --- lags ----------------------------------------------------------------------------

def _series(start, hours, fn):
    return {start + timedelta(hours=h): fn(h) for h in range(hours)}


def test_constant_series_lags():
    start = datetime(2014, 1, 1)
    series = _series(start, 600, lambda h: 1.5)
    t = start + timedelta(hours=550)
    for case in ("short_term", "long_term"):
        assert np.all(lag_features(series, t, case) == 1.5)


def test_first_short_lag_is_previous_hour():
    start = datetime(2014, 1, 1)
    series = _series(start, 400, lambda h: 1.0 + h / 1000)
    t = start + timedelta(hours=380)
    lags = lag_features(series, t, "short_term")
    assert lags[0] == series[t - timedelta(hours=1)]
    assert lags.tolist() == [series[t - timedelta(hours=h)] for h in LAGS["short_term"]]


def test_missing_lag_names_timestamp():
    start = datetime(2014, 1, 1)
    series = _series(start, 100, lambda h: 1.2)
    t = start + timedelta(hours=50)
    with pytest.raises(MissingLag) as info:
        lag_features(series, t, "long_term")
    assert info.value.timestamp == t - timedelta(hours=72)  # lags 24..48 exist, 72 does not


# --- assemble -----------------------------------------------------------------------

def _records(start, hours, tti=lambda h: 1.0 + (h % 24) / 100):
    out = []
    for h in range(hours):
        ts = start + timedelta(hours=h)
        out.append(JoinedRecord(ts, tti(h), weather_day(ts.date())))
    return out


def test_assemble_drops_rows_without_history():
    recs = _records(datetime(2014, 1, 1), 800)
    short = assemble(recs, "short_term")
    long = assemble(recs, "long_term")
    assert short.shape == (800 - 336, 93)
    assert long.shape == (800 - 504, 93)
    assert short.y.tolist() == [r.tti for r in recs[336:]]
    assert short.timestamps[0] == recs[336].timestamp


def test_assemble_row_content():
    recs = _records(datetime(2014, 1, 1), 500)
    m = assemble(recs, "short")
    i = 10
    t = m.timestamps[i]
    row = m.X[i]
    assert tuple(row[:5]) == calendar_features(t)
    assert np.array_equal(row[5:48], indicator_features(t))
    assert tuple(row[48:82]) == recs[346].weather.indexes
    by_ts = {r.timestamp: r.tti for r in recs}
    assert row[82:].tolist() == [by_ts[t - timedelta(hours=h)] for h in LAGS["short_term"]]


def test_assemble_full_scale(short_matrix, long_matrix, full_records):
    assert short_matrix.shape[1] == long_matrix.shape[1] == 93
    n = len(full_records)
    # the first 336 (504) hours lack history; a few more rows lose a lag to gaps
    assert n - 336 - 1000 < short_matrix.shape[0] <= n - 336
    assert long_matrix.shape[0] < short_matrix.shape[0]


def test_one_week_is_too_short():
    with pytest.raises(TooFewRows):
        assemble(_records(datetime(2014, 1, 1), 24 * 7), "long_term")


@pytest.mark.parametrize("case", ["short_term", "long_term"])
def test_no_lag_newer_than_case_minimum(case, short_matrix, long_matrix):
    m = short_matrix if case == "short_term" else long_matrix
    by_ts = dict(zip(m.timestamps, m.y))
    lag_cols = [i for i, n in enumerate(m.names) if n.startswith("lag_")]
    hours = [int(m.names[i][4:-1]) for i in lag_cols]
    assert min(hours) == min(LAGS[case])
    # every lag value is the TTI exactly its offset earlier, never a newer one
    for i in range(0, m.shape[0], 997):
        t = m.timestamps[i]
        for col, h in zip(lag_cols, hours):
            earlier = t - timedelta(hours=h)
            if earlier in by_ts:
                assert m.X[i, col] == by_ts[earlier]


def test_design_matrix_is_read_only(short_matrix):
    with pytest.raises(ValueError):
        short_matrix.X[0, 0] = 1.0


def test_design_matrix_rejects_non_finite():
    with pytest.raises(ValueError):
        DesignMatrix(np.array([[1.0, np.nan]]), [1.0], ["a", "b"])
    with pytest.raises(ValueError):
        DesignMatrix(np.ones((2, 2)), [1.0, 2.0], ["a"])


# --- polynomial expansion -----------------------------------------------------------

def test_degree_two_example():
    a, b = 3.0, 5.0
    out = expand_array(np.array([[a, b]]), 2)
    assert out[0].tolist() == [1, a, b, a * a, a * b, b * b]
    m = polynomial_expand(DesignMatrix([[a, b]], [1.0], ["a", "b"]), 2)
    assert m.names == ("1", "a", "b", "a^2", "a*b", "b^2")


def test_degree_one():
    m = polynomial_expand(DesignMatrix([[2.0, 7.0]], [1.0], ["a", "b"]), 1)
    assert m.names == ("1", "a", "b") and m.X[0].tolist() == [1, 2, 7]


def _count_monomials(p, d):
    """Brute force: exponent vectors with total degree <= d."""
    return sum(1 for e in itertools.product(range(d + 1), repeat=p) if sum(e) <= d)


@pytest.mark.parametrize("p", range(1, 11))
@pytest.mark.parametrize("d", range(1, 6))
def test_expansion_width(p, d):
    assert expansion_width(p, d) == math.comb(p + d, d)
    if p <= 6:
        assert expansion_width(p, d) == _count_monomials(p, d)
    X = np.random.default_rng(p * 10 + d).standard_normal((3, p))
    assert expand_array(X, d).shape == (3, math.comb(p + d, d))


def test_p3_degree2_width_by_enumeration():
    assert len(monomials(3, 2)) == 10 == _count_monomials(3, 2)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 4), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_expansion_columns_are_monomials(p, d, seed):
    X = np.random.default_rng(seed).uniform(-2, 2, (4, p))
    out = expand_array(X, d)
    for col, combo in enumerate(monomials(p, d)):
        expected = np.prod([X[:, c] for c in combo], axis=0) if combo else np.ones(4)
        np.testing.assert_allclose(out[:, col], expected, rtol=1e-12, atol=1e-12)
    np.testing.assert_array_equal(out[:, 1:p + 1], X)  # degree-1 block recovers the input


@pytest.mark.parametrize("degree", [0, 6, 2.0, -1])
def test_degree_out_of_range(degree):
    with pytest.raises(DegreeOutOfRange):
        expand_array(np.ones((2, 2)), degree)


def test_expansion_cap():
    with pytest.raises(ExpansionTooLarge) as info:
        expand_array(np.ones((2, 24)), 4)  # C(28, 4) = 20475 > 20000
    assert info.value.width == 20475
    assert expand_array(np.ones((1, 23)), 4).shape[1] == 17550


@pytest.mark.parametrize("degree", [1, 2, 3, 5])
def test_monomial_gram_matches_explicit(degree, rng):
    A = rng.standard_normal((7, 4))
    B = rng.standard_normal((5, 4))
    explicit = expand_array(A, degree) @ expand_array(B, degree).T
    np.testing.assert_allclose(monomial_gram(A, B, degree), explicit, rtol=1e-10, atol=1e-10)


# --- standardization -----------------------------------------------------------------

def test_standardize_uses_sample_sd():
    Z, scaler = standardize(np.array([[1.0], [2.0], [3.0]]))
    np.testing.assert_allclose(Z[:, 0], [-1.0, 0.0, 1.0], atol=1e-12)
    assert scaler.scale[0] == pytest.approx(1.0)


def test_constant_column_passes_through():
    X = np.array([[5.0, 1.0], [5.0, 2.0], [5.0, 4.0]])
    Z, scaler = standardize(X)
    assert scaler.constant.tolist() == [True, False]
    assert Z[:, 0].tolist() == [5.0, 5.0, 5.0]


def test_large_constant_column_detected():
    X = np.column_stack([np.full(4, 2010.0), np.arange(4.0)])
    assert Scaler.fit(X).constant.tolist() == [True, False]


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 30), st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_standardize_properties(n, p, seed):
    X = np.random.default_rng(seed).normal(3.0, 2.0, (n, p)) * np.arange(1, p + 1)
    Z, scaler = standardize(X)
    varying = ~scaler.constant
    assert np.all(np.abs(Z.mean(axis=0)[varying]) < 1e-10)
    if n > 1:
        np.testing.assert_allclose(Z[:, varying].var(axis=0, ddof=1), 1.0, rtol=1e-9)
    np.testing.assert_allclose(scaler.invert(Z), X, rtol=1e-12, atol=1e-12)


def test_matrix_scaler_round_trip(small_records):
    m = assemble(small_records, "short")
    Z, scaler = standardize(m)
    assert isinstance(Z, DesignMatrix) and Z.names == m.names
    back = invert_scaler(scaler, apply_scaler(scaler, m))
    np.testing.assert_allclose(back.X, m.X, rtol=1e-12, atol=1e-9)


def test_dump_matrix_csv(tmp_path, small_records):
    m = assemble(small_records, "long")
    path = tmp_path / "m.csv"
    with open(path, "w") as fh:
        m.to_csv(fh)
    lines = path.read_text().splitlines()
    assert lines[0].split(",") == ["timestamp"] + list(m.names) + ["tti"]
    assert len(lines) == m.shape[0] + 1
    first = lines[1].split(",")
    assert float(first[-1]) == m.y[0] and float(first[1]) == m.X[0, 0]
