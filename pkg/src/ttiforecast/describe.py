"""Descriptive aggregations of hourly TTI and plot-ready data files.

Means are taken over hourly records (not over days) within each key.
Precipitation splits use the day's ``precipitation_total``:

* ``"wet_dry"``: wet when precipitation > 0.
* ``"high_low"``: high when precipitation is at or above the 75th percentile
  of the wet days in the input; everything else (dry days included) is low.
* a number ``t``: high when precipitation >= ``t``.
"""

import csv
import os
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyInput, IoFailure

KEY_KINDS = ("day", "month", "hour", "weekday", "year")

#: Output file per key kind.
FIGURE_FILES = {
    "day": "fig1_daily.csv",
    "month": "fig2_monthly.csv",
    "hour": "fig3_hourly.csv",
    "weekday": "fig4_weekday.csv",
    "year": "fig5_yearly.csv",
}

HIGH_PERCENTILE = 75.0


@dataclass(frozen=True)
class AggregateSeries:
    """Mean TTI per key.

    ``points`` holds ``(key, mean, count)`` triples in key order. ``split`` is
    ``None`` or the precipitation label of this half. ``snow_days`` (day
    series only) lists the dates with snowfall > 0.
    """

    key_kind: str
    points: tuple
    split: str = None
    snow_days: frozenset = field(default_factory=frozenset)

    @property
    def keys(self):
        return [p[0] for p in self.points]

    @property
    def means(self):
        return np.array([p[1] for p in self.points])

    @property
    def counts(self):
        return np.array([p[2] for p in self.points], dtype=int)

    def value(self, key):
        for k, mean, _ in self.points:
            if k == key:
                return mean
        raise KeyError(key)


def record_key(ts, key_kind):
    if key_kind == "day":
        return ts.date()
    if key_kind == "month":
        return ts.month
    if key_kind == "hour":
        return ts.hour
    if key_kind == "weekday":
        return (ts.weekday() + 1) % 7  # Sunday = 0
    if key_kind == "year":
        return ts.year
    raise ValueError(f"unknown key kind {key_kind!r}; expected one of {KEY_KINDS}")


def _precipitation(record):
    return record.weather["precipitation_total"]


def high_threshold(records):
    """75th percentile of daily precipitation over the distinct wet days."""
    wet = {r.timestamp.date(): _precipitation(r) for r in records if _precipitation(r) > 0}
    if not wet:
        return np.inf
    return float(np.percentile(list(wet.values()), HIGH_PERCENTILE))


def _labeller(records, split_rule):
    if split_rule == "wet_dry":
        return lambda r: "wet" if _precipitation(r) > 0 else "dry", ("wet", "dry")
    if split_rule == "high_low":
        t = high_threshold(records)
    elif isinstance(split_rule, (int, float)) and not isinstance(split_rule, bool):
        t = float(split_rule)
    else:
        raise ValueError(f"unknown split rule {split_rule!r}")
    return lambda r: "high" if _precipitation(r) >= t else "low", ("high", "low")


def _series(records, key_kind, split=None):
    sums = defaultdict(float)
    counts = defaultdict(int)
    snow = set()
    for r in records:
        k = record_key(r.timestamp, key_kind)
        sums[k] += r.tti
        counts[k] += 1
        if key_kind == "day" and r.weather["snowfall"] > 0:
            snow.add(k)
    points = tuple((k, sums[k] / counts[k], counts[k]) for k in sorted(sums))
    return AggregateSeries(key_kind, points, split, frozenset(snow))


def aggregate_mean(records, key_kind, split_rule=None):
    """Mean TTI per key; a list with one series, or two when ``split_rule`` is given.

    Split series come in label order (wet, dry) or (high, low); a half with no
    records is an empty series.

    >>> from datetime import datetime
    >>> from ttiforecast.ingest import JoinedRecord, WeatherDay
    >>> day = WeatherDay(datetime(2015, 3, 4).date(), [0.0] * 34)
    >>> recs = [JoinedRecord(datetime(2015, 3, 4, 8), 1.2, day),
    ...         JoinedRecord(datetime(2015, 3, 4, 8), 1.4, day)]
    >>> [(key, round(mean, 12), n) for key, mean, n in aggregate_mean(recs, "hour")[0].points]
    [(8, 1.3, 2)]
    """
    records = list(records)
    if not records:
        raise EmptyInput("no records to aggregate")
    if key_kind not in KEY_KINDS:
        raise ValueError(f"unknown key kind {key_kind!r}; expected one of {KEY_KINDS}")
    if split_rule is None:
        return [_series(records, key_kind)]
    label, names = _labeller(records, split_rule)
    parts = {name: [] for name in names}
    for r in records:
        parts[label(r)].append(r)
    return [_series(parts[name], key_kind, name) for name in names]


def describe_all(records):
    """The series behind the five descriptive figures.

    Daily and yearly series are unsplit, monthly and weekday series are split
    high/low, and the hourly series is split wet/dry.
    """
    out = []
    out += aggregate_mean(records, "day")
    out += aggregate_mean(records, "month", "high_low")
    out += aggregate_mean(records, "hour", "wet_dry")
    out += aggregate_mean(records, "weekday", "high_low")
    out += aggregate_mean(records, "year")
    return out


def emit_report(series_set, path):
    """Write one CSV per key kind present in ``series_set``; returns the written paths.

    Columns are ``key,mean_tti,count`` plus ``split`` when any series of that
    kind is split, plus ``snow`` (0/1) for the daily file.
    """
    series_set = [s for s in series_set if s.points]
    if not series_set:
        raise EmptyInput("no series to write")
    by_kind = defaultdict(list)
    for s in series_set:
        by_kind[s.key_kind].append(s)
    try:
        os.makedirs(path, exist_ok=True)
        written = []
        for kind in KEY_KINDS:
            if kind not in by_kind:
                continue
            group = by_kind[kind]
            split = any(s.split is not None for s in group)
            header = ["key", "mean_tti", "count"] + (["split"] if split else [])
            if kind == "day":
                header.append("snow")
            target = os.path.join(path, FIGURE_FILES[kind])
            with open(target, "w", newline="") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(header)
                for s in group:
                    for key, mean, count in s.points:
                        key_text = key.isoformat() if hasattr(key, "isoformat") else str(key)
                        row = [key_text, repr(float(mean)), count]
                        if split:
                            row.append(s.split or "")
                        if kind == "day":
                            row.append(int(key in s.snow_days))
                        writer.writerow(row)
            written.append(target)
    except OSError as exc:
        raise IoFailure(f"cannot write report to {path}: {exc}") from exc
    return written
