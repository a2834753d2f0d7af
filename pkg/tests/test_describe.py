import csv
from datetime import date, datetime, timedelta

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import weather_day
from ttiforecast.describe import (
    FIGURE_FILES,
    aggregate_mean,
    describe_all,
    emit_report,
    high_threshold,
)
from ttiforecast.errors import EmptyInput, IoFailure
from ttiforecast.ingest import JoinedRecord


def rec(ts, tti, **weather):
    return JoinedRecord(ts, tti, weather_day(ts.date(), **weather))


def test_two_records_same_hour():
    day = datetime(2015, 3, 4, 8)
    (series,) = aggregate_mean([rec(day, 1.2), rec(day, 1.4)], "hour")
    assert series.keys == [8]
    assert series.means[0] == pytest.approx(1.3, abs=1e-15)
    assert series.counts.tolist() == [2]


@pytest.mark.parametrize("kind, ts, key", [
    ("day", datetime(2012, 2, 29, 5), date(2012, 2, 29)),
    ("month", datetime(2012, 2, 29, 5), 2),
    ("hour", datetime(2012, 2, 29, 5), 5),
    ("weekday", datetime(2012, 2, 26, 5), 0),  # a Sunday
    ("weekday", datetime(2012, 3, 3, 5), 6),  # a Saturday
    ("year", datetime(2012, 2, 29, 5), 2012),
])
def test_keys(kind, ts, key):
    assert aggregate_mean([rec(ts, 1.5)], kind)[0].keys == [key]


def test_empty_input():
    with pytest.raises(EmptyInput):
        aggregate_mean([], "hour")


def test_unknown_kind():
    with pytest.raises(ValueError):
        aggregate_mean([rec(datetime(2012, 1, 1), 1.1)], "minute")


def test_wet_dry_split():
    recs = [rec(datetime(2012, 1, 1, 8), 1.1),
            rec(datetime(2012, 1, 2, 8), 1.5, precipitation_total=3.0),
            rec(datetime(2012, 1, 3, 8), 1.3, precipitation_total=0.1)]
    wet, dry = aggregate_mean(recs, "hour", "wet_dry")
    assert (wet.split, dry.split) == ("wet", "dry")
    assert wet.points == ((8, pytest.approx(1.4), 2),)
    assert dry.points == ((8, 1.1, 1),)


def test_high_low_uses_wet_day_percentile():
    precip = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0]
    recs = [rec(datetime(2012, 1, 1 + i, 9), 1.0 + i, precipitation_total=p)
            for i, p in enumerate(precip)]
    assert high_threshold(recs) == pytest.approx(np.percentile([1, 2, 3, 4, 5], 75))  # 4.0
    high, low = aggregate_mean(recs, "hour", "high_low")
    assert high.counts.sum() == 2  # days with 4 and 5
    assert low.counts.sum() == 4


def test_numeric_threshold():
    recs = [rec(datetime(2012, 1, 1 + i, 9), 1.2, precipitation_total=float(i)) for i in range(5)]
    high, low = aggregate_mean(recs, "hour", 2.0)
    assert (high.counts.sum(), low.counts.sum()) == (3, 2)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 24 * 60), st.floats(1.0, 3.0),
                          st.sampled_from([0.0, 0.0, 0.5, 4.0, 12.0])),
                min_size=1, max_size=60))
def test_aggregation_properties(items):
    base = datetime(2013, 1, 1)
    recs = [rec(base + timedelta(hours=h), v, precipitation_total=p) for h, v, p in items]
    total = sum(r.tti for r in recs)
    for kind in ("day", "month", "hour", "weekday", "year"):
        (s,) = aggregate_mean(recs, kind)
        assert (s.means * s.counts).sum() == pytest.approx(total, rel=1e-9)
        assert s.counts.min() >= 1
        assert len(set(s.keys)) == len(s.keys) and s.keys == sorted(s.keys)
        for rule in ("wet_dry", "high_low"):
            a, b = aggregate_mean(recs, kind, rule)
            assert a.counts.sum() + b.counts.sum() == len(recs)


def test_snow_days_flagged(tmp_path):
    recs = [rec(datetime(2014, 2, 1, h), 1.3) for h in range(3)]
    recs += [rec(datetime(2014, 2, 2, h), 1.8, snowfall=4.0, precipitation_total=4.0)
             for h in range(3)]
    (daily,) = aggregate_mean(recs, "day")
    assert daily.snow_days == frozenset({date(2014, 2, 2)})
    emit_report([daily], tmp_path)
    with open(tmp_path / "fig1_daily.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["snow"] for r in rows] == ["0", "1"]


# --- report files ----------------------------------------------------------------

def test_hourly_file_rows(small_records, tmp_path):
    emit_report(aggregate_mean(small_records, "hour"), tmp_path / "a")
    emit_report(aggregate_mean(small_records, "hour", "wet_dry"), tmp_path / "b")
    with open(tmp_path / "a" / "fig3_hourly.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["key", "mean_tti", "count"] and len(rows) == 25
    with open(tmp_path / "b" / "fig3_hourly.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["key", "mean_tti", "count", "split"] and len(rows) == 49


def test_yearly_file_2010_to_2015(full_records, tmp_path):
    recs = [r for r in full_records if r.timestamp.year <= 2015]
    emit_report(aggregate_mean(recs, "year"), tmp_path)
    with open(tmp_path / "fig5_yearly.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["key"] for r in rows] == [str(y) for y in range(2010, 2016)]


def test_all_five_files(small_records, tmp_path):
    written = emit_report(describe_all(small_records), tmp_path)
    assert sorted(p.rsplit("/", 1)[-1] for p in written) == sorted(FIGURE_FILES.values())


def test_empty_series_set(tmp_path):
    with pytest.raises(EmptyInput):
        emit_report([], tmp_path / "out")
    assert not (tmp_path / "out").exists()


def test_unwritable_path(small_records, tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(IoFailure):
        emit_report(aggregate_mean(small_records, "hour"), blocker / "sub")


# --- calibration of the generator -------------------------------------------------

def test_weekday_extremes(full_records):
    (s,) = aggregate_mean(full_records, "weekday")
    assert s.keys[int(np.argmax(s.means))] == 3  # Wednesday
    assert s.keys[int(np.argmin(s.means))] == 6  # Saturday


def test_hourly_peaks(full_records):
    (s,) = aggregate_mean(full_records, "hour")
    m = s.means
    peaks = [h for h in range(1, 23) if m[h] > m[h - 1] and m[h] > m[h + 1]]
    assert peaks == [8, 17]


def test_june_is_monthly_max(full_records):
    (s,) = aggregate_mean(full_records, "month")
    assert s.keys[int(np.argmax(s.means))] == 6


def test_wet_above_dry(full_records):
    wet, dry = aggregate_mean(full_records, "hour", "wet_dry")
    assert wet.keys == dry.keys == list(range(24))
    assert int((wet.means >= dry.means).sum()) >= 18
