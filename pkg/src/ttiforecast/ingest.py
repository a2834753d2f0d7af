"""Parse, validate and join hourly TTI and daily weather records.

Also home to :func:`synthesize_dataset`, a seeded generator producing
TTI/weather data shaped like the Washington DC network series (hourly peaks,
weekday/month seasonality, weather uplift) for use when real data is not
available.
"""

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta

import numpy as np

from .errors import (
    DuplicateDate,
    DuplicateTimestamp,
    EmptyIntersection,
    InvalidRange,
    MalformedRow,
    MissingColumn,
    NonHourAligned,
    TtiBelowOne,
)

logger = logging.getLogger(__name__)

_TRIPLE_BASES = ("temperature", "dew_point", "humidity", "pressure", "visibility", "wind_speed")

#: Daily weather columns in their fixed order (34 names).
WEATHER_COLUMNS = tuple(
    [f"{base}_{stat}" for base in _TRIPLE_BASES for stat in ("min", "mean", "max")]
    + [
        "wind_gust_max",
        "precipitation_total",
        "snowfall",
        "snow_depth",
        "cloud_cover_mean",
        "heating_degree_days",
        "cooling_degree_days",
        "sunshine_hours",
        "precipitation_max_hourly",
        "pressure_tendency",
    ]
    + [f"event_{kind}" for kind in ("rain", "snow", "fog", "thunder", "hail", "high_wind")]
)
assert len(WEATHER_COLUMNS) == 34

WEATHER_INDEX = {name: i for i, name in enumerate(WEATHER_COLUMNS)}
EVENT_COLUMNS = tuple(c for c in WEATHER_COLUMNS if c.startswith("event_"))
NONNEGATIVE_COLUMNS = ("precipitation_total", "snowfall")


@dataclass(frozen=True)
class TtiObservation:
    timestamp: datetime
    tti: float


@dataclass(frozen=True)
class WeatherDay:
    date: date
    indexes: tuple
    # names of columns filled by imputation; not part of record identity
    imputed: tuple = field(default=(), compare=False)

    def __getitem__(self, name):
        return self.indexes[WEATHER_INDEX[name]]

    @property
    def flagged(self):
        return bool(self.imputed)


@dataclass(frozen=True)
class JoinedRecord:
    timestamp: datetime
    tti: float
    weather: WeatherDay


def _check_weather_values(values):
    """Return a description of the first invariant a weather row breaks, or None."""
    for col in NONNEGATIVE_COLUMNS:
        if values[WEATHER_INDEX[col]] < 0:
            return f"{col} is negative"
    for base in _TRIPLE_BASES:
        lo, mid, hi = (values[WEATHER_INDEX[f"{base}_{s}"]] for s in ("min", "mean", "max"))
        if not lo <= mid <= hi:
            return f"{base} min/mean/max out of order"
    for col in EVENT_COLUMNS:
        if values[WEATHER_INDEX[col]] not in (0.0, 1.0):
            return f"{col} is not 0/1"
    return None


def _read_rows(text):
    if isinstance(text, str):
        text = io.StringIO(text)
    return csv.reader(text)


def _parse_float(cell, line, column):
    try:
        value = float(cell)
    except ValueError:
        raise MalformedRow(line, f"{column}: not a number: {cell!r}") from None
    if not math.isfinite(value):
        raise MalformedRow(line, f"{column}: non-finite value")
    return value


def parse_tti_csv(text):
    """Parse ``timestamp,tti`` CSV text (or a file object) into sorted observations.

    A missing header is tolerated: if the first row does not read
    ``timestamp,tti`` it is treated as data.
    """
    observations = []
    seen = set()
    for line, row in enumerate(_read_rows(text), start=1):
        if not row or all(not c.strip() for c in row):
            continue
        if line == 1 and [c.strip().lower() for c in row] == ["timestamp", "tti"]:
            continue
        if len(row) != 2:
            raise MalformedRow(line, f"expected 2 cells, got {len(row)}")
        try:
            ts = datetime.fromisoformat(row[0].strip())
        except ValueError:
            raise MalformedRow(line, f"bad timestamp {row[0]!r}") from None
        if ts.tzinfo is not None:
            raise MalformedRow(line, "timestamps must be naive local time")
        tti = _parse_float(row[1].strip(), line, "tti")
        if ts.minute or ts.second or ts.microsecond:
            raise NonHourAligned(f"line {line}: {ts.isoformat()} is not on the hour")
        if tti < 1.0:
            raise TtiBelowOne(f"line {line}: tti {tti} < 1")
        if ts in seen:
            raise DuplicateTimestamp(f"line {line}: {ts.isoformat()} repeated")
        seen.add(ts)
        observations.append(TtiObservation(ts, tti))
    observations.sort(key=lambda o: o.timestamp)
    return observations


def parse_weather_csv(text):
    """Parse daily weather CSV with a ``date`` column plus the 34 schema columns.

    Empty cells are imputed with the column median over the file and the
    record is flagged through :attr:`WeatherDay.imputed`.
    """
    rows = _read_rows(text)
    try:
        header = [c.strip() for c in next(rows)]
    except StopIteration:
        raise MissingColumn("date") from None
    for name in ("date",) + WEATHER_COLUMNS:
        if name not in header:
            raise MissingColumn(name)
    date_pos = header.index("date")
    positions = [header.index(name) for name in WEATHER_COLUMNS]

    parsed = []
    seen = set()
    for line, row in enumerate(rows, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise MalformedRow(line, f"expected {len(header)} cells, got {len(row)}")
        try:
            day = date.fromisoformat(row[date_pos].strip())
        except ValueError:
            raise MalformedRow(line, f"bad date {row[date_pos]!r}") from None
        if day in seen:
            raise DuplicateDate(f"line {line}: {day.isoformat()} repeated")
        seen.add(day)
        values = []
        for name, pos in zip(WEATHER_COLUMNS, positions):
            cell = row[pos].strip()
            values.append(None if cell == "" else _parse_float(cell, line, name))
        parsed.append((line, day, values))

    medians = []
    for j, name in enumerate(WEATHER_COLUMNS):
        present = [v[j] for _, _, v in parsed if v[j] is not None]
        if parsed and not present:
            raise MissingColumn(name)
        medians.append(float(np.median(present)) if present else math.nan)

    days = []
    for line, day, values in parsed:
        imputed = tuple(WEATHER_COLUMNS[j] for j, v in enumerate(values) if v is None)
        filled = [medians[j] if v is None else v for j, v in enumerate(values)]
        if imputed:
            _clamp_imputed_triples(filled, imputed)
        problem = _check_weather_values(filled)
        if problem:
            raise MalformedRow(line, problem)
        days.append(WeatherDay(day, tuple(filled), imputed))
    days.sort(key=lambda d: d.date)
    return days


def _clamp_imputed_triples(values, imputed):
    # a file-wide median can land outside the row's own observed min/max
    for name in imputed:
        base, _, stat = name.rpartition("_")
        if base not in _TRIPLE_BASES:
            continue
        lo_name, mid_name, hi_name = (f"{base}_{s}" for s in ("min", "mean", "max"))
        lo, mid, hi = (WEATHER_INDEX[n] for n in (lo_name, mid_name, hi_name))
        if stat == "mean":
            bounds = (values[lo] if lo_name not in imputed else -math.inf,
                      values[hi] if hi_name not in imputed else math.inf)
        elif stat == "min":
            bounds = (-math.inf, values[mid] if mid_name not in imputed else values[hi])
        else:
            bounds = (values[mid] if mid_name not in imputed else values[lo], math.inf)
        j = WEATHER_INDEX[name]
        values[j] = min(max(values[j], bounds[0]), bounds[1])


def write_tti_csv(observations, fh):
    fh.write("timestamp,tti\n")
    for o in observations:
        fh.write(f"{o.timestamp.isoformat()},{o.tti!r}\n")


def write_weather_csv(days, fh):
    fh.write(",".join(("date",) + WEATHER_COLUMNS) + "\n")
    for d in days:
        fh.write(d.date.isoformat() + "," + ",".join(repr(float(v)) for v in d.indexes) + "\n")


def join_tti_weather(tti, weather):
    """Attach each observation's daily weather.

    Observations without a weather record for their date are dropped and the
    count is logged; use :func:`join_with_report` to get the count back.
    """
    return join_with_report(tti, weather)[0]


def join_with_report(tti, weather):
    """Like :func:`join_tti_weather` but also return the dropped-observation count."""
    by_date = {d.date: d for d in weather}
    joined = [JoinedRecord(o.timestamp, o.tti, by_date[o.timestamp.date()])
              for o in tti if o.timestamp.date() in by_date]
    if not joined:
        raise EmptyIntersection("no observation falls on a date with weather data")
    dropped = len(tti) - len(joined)
    if dropped:
        logger.info("join dropped %d observations without weather", dropped)
    return joined, dropped


# ---------------------------------------------------------------------------
# synthetic data

# weekday multipliers, Sunday first
_WEEKDAY_FACTOR = np.array([0.93, 0.97, 1.00, 1.06, 1.02, 0.98, 0.84])
_MONTH_FACTOR = np.array([0.93, 0.94, 0.97, 0.99, 1.04, 1.08, 0.98, 0.95, 1.00, 1.04, 0.99, 0.96])


def _bump(h, center, width):
    return np.exp(-0.5 * ((h - center) / width) ** 2)


def _hour_profiles():
    h = np.arange(24, dtype=float)
    workday = (0.06 + 0.50 * _bump(h, 8, 1.2) + 0.60 * _bump(h, 17, 1.5)
               + 0.14 * _bump(h, 12.5, 3.0))
    weekend = 0.05 + 0.18 * _bump(h, 14, 3.5)
    return workday, weekend


def _dst_gap(day):
    """The nonexistent 02:00 local hour on the US spring-forward Sunday, if any."""
    if day.month != 3:
        return None
    first = date(day.year, 3, 1)
    second_sunday = first + timedelta(days=(6 - first.weekday()) % 7 + 7)
    return 2 if day == second_sunday else None


def _synth_weather(days, rng):
    n = len(days)
    doy = np.array([d.timetuple().tm_yday for d in days], dtype=float)
    season = np.sin(2 * np.pi * (doy - 105) / 365.25)

    anomaly = np.zeros(n)
    shocks = rng.normal(0, 2.5, n)
    for i in range(1, n):
        anomaly[i] = 0.7 * anomaly[i - 1] + shocks[i]
    t_mean = 13.5 + 11.5 * season + anomaly
    t_range = np.clip(9 + rng.normal(0, 2, n), 3, 18)

    wet = rng.random(n) < 0.30 + 0.05 * season
    precip = np.where(wet, rng.gamma(0.8, 9.0, n), 0.0)
    cold = t_mean < 1.5
    snowfall = np.where(wet & cold, precip * rng.uniform(0.6, 1.4, n), 0.0)
    snow_depth = np.zeros(n)
    for i in range(n):
        prev = snow_depth[i - 1] if i else 0.0
        melt = max(0.0, t_mean[i]) * 1.5
        snow_depth[i] = max(0.0, prev - melt) + snowfall[i]

    dew_mean = t_mean - np.clip(5 - 3 * wet + rng.normal(0, 1.5, n), 0.5, None)
    hum_mean = np.clip(62 + 18 * wet + rng.normal(0, 8, n), 25, 99)
    press_mean = 1016 - 6 * wet + rng.normal(0, 5, n)
    fog = rng.random(n) < 0.03 + 0.08 * wet
    vis_mean = np.clip(9.2 - 2.5 * wet - 3.5 * fog - 0.15 * np.minimum(precip, 20)
                       - 0.2 * np.minimum(snowfall, 10) + rng.normal(0, 0.6, n), 0.3, 10)
    wind_mean = np.clip(8 + 3 * wet + rng.gamma(2, 1.5, n), 1, None)
    gust = wind_mean * rng.uniform(1.6, 2.6, n)
    cloud = np.clip(0.35 + 0.45 * wet + rng.normal(0, 0.15, n), 0, 1)

    def triple(mid, spread_lo, spread_hi, lo_clip=-math.inf, hi_clip=math.inf):
        lo = np.clip(mid - spread_lo, lo_clip, hi_clip)
        hi = np.clip(mid + spread_hi, lo_clip, hi_clip)
        mid = np.clip(mid, lo, hi)
        return lo, mid, hi

    cols = {}
    for base, parts in (
        ("temperature", triple(t_mean, t_range / 2, t_range / 2)),
        ("dew_point", triple(dew_mean, rng.uniform(1, 5, n), rng.uniform(1, 5, n))),
        ("humidity", triple(hum_mean, rng.uniform(5, 25, n), rng.uniform(3, 15, n), 5, 100)),
        ("pressure", triple(press_mean, rng.uniform(1, 8, n), rng.uniform(1, 8, n))),
        ("visibility", triple(vis_mean, rng.uniform(0.1, 4, n) + 2 * fog, rng.uniform(0, 1.5, n), 0.1, 10)),
        ("wind_speed", triple(wind_mean, rng.uniform(2, 7, n), rng.uniform(3, 10, n), 0, None)),
    ):
        for stat, values in zip(("min", "mean", "max"), parts):
            cols[f"{base}_{stat}"] = values
    cols["wind_gust_max"] = np.maximum(gust, cols["wind_speed_max"])
    cols["precipitation_total"] = precip
    cols["snowfall"] = snowfall
    cols["snow_depth"] = snow_depth
    cols["cloud_cover_mean"] = cloud
    cols["heating_degree_days"] = np.maximum(0.0, 18.3 - t_mean)
    cols["cooling_degree_days"] = np.maximum(0.0, t_mean - 18.3)
    cols["sunshine_hours"] = np.clip((1 - cloud) * (12 + 2.5 * season), 0, None)
    cols["precipitation_max_hourly"] = precip * rng.uniform(0.15, 0.6, n)
    cols["pressure_tendency"] = np.diff(press_mean, prepend=press_mean[0])
    cols["event_rain"] = (wet & ~cold).astype(float)
    cols["event_snow"] = (snowfall > 0).astype(float)
    cols["event_fog"] = fog.astype(float)
    cols["event_thunder"] = (wet & (season > 0.3) & (rng.random(n) < 0.35)).astype(float)
    cols["event_hail"] = (wet & (rng.random(n) < 0.01)).astype(float)
    cols["event_high_wind"] = (cols["wind_gust_max"] > 35).astype(float)

    matrix = np.column_stack([cols[name] for name in WEATHER_COLUMNS])
    # six decimals keeps CSV output compact and exactly reproducible
    matrix = np.round(matrix, 6)
    return [WeatherDay(d, tuple(float(v) for v in row)) for d, row in zip(days, matrix)]


def synthesize_dataset(start, end, seed):
    """Generate hourly TTI and daily weather for the dates ``start``..``end`` inclusive.

    Hourly TTI is ``1 + softplus(level)`` where the level combines an hourly
    profile (peaks at 08:00 and 17:00 on workdays), weekday and month
    multipliers (Wednesday and June highest, Saturday lowest), precipitation,
    snow and low-visibility uplift, an hourly AR(1) disturbance, a daily
    disturbance and white noise. The spring-forward DST hour and a small
    random fraction of hours (sensor outages) are absent.

    Returns:
        ``(observations, weather_days)``; identical for identical arguments.
    """
    if isinstance(start, datetime):
        start = start.date()
    if isinstance(end, datetime):
        end = end.date()
    if not start < end:
        raise InvalidRange(f"start {start} must precede end {end}")
    rng = np.random.default_rng(seed)
    days = [start + timedelta(days=i) for i in range((end - start).days + 1)]
    weather = _synth_weather(days, rng)

    n_days = len(days)
    n_hours = 24 * n_days
    workday, weekend = _hour_profiles()
    hours = np.tile(np.arange(24), n_days)
    day_idx = np.repeat(np.arange(n_days), 24)
    weekday = np.array([(d.weekday() + 1) % 7 for d in days])[day_idx]
    month = np.array([d.month for d in days])[day_idx]
    is_weekend = (weekday == 0) | (weekday == 6)
    profile = np.where(is_weekend, weekend[hours], workday[hours])

    w = np.array([d.indexes for d in weather])
    precip = w[:, WEATHER_INDEX["precipitation_total"]]
    snow = w[:, WEATHER_INDEX["snowfall"]]
    depth = w[:, WEATHER_INDEX["snow_depth"]]
    vis = w[:, WEATHER_INDEX["visibility_mean"]]
    weather_factor = (1.0 + 0.10 * (precip > 0) + 0.008 * np.minimum(precip, 30)
                      + 0.9 * np.minimum(snow / 10.0, 1.5) + 0.01 * np.minimum(depth, 20)
                      + 0.035 * (10.0 - vis))
    weather_add = 0.05 * np.minimum(snow / 10.0, 1.5) + 0.01 * (precip > 0)

    level = (0.03 + profile * _WEEKDAY_FACTOR[weekday] * _MONTH_FACTOR[month - 1]
             * weather_factor[day_idx] + weather_add[day_idx])

    innovations = rng.normal(0.0, 0.040, n_hours)
    ar = np.empty(n_hours)
    acc = 0.0
    for i in range(n_hours):
        acc = 0.92 * acc + innovations[i]
        ar[i] = acc
    daily = rng.normal(0.0, 0.040, n_days)[day_idx]
    # disturbances scale with congestion so quiet night hours stay calm
    scale = 0.4 + 2.0 * profile
    level = level + scale * (ar + daily) + rng.normal(0.0, 0.006, n_hours)

    s = 0.02
    tti = 1.0 + s * np.logaddexp(0.0, level / s)
    tti = np.round(tti, 6)
    tti = np.maximum(tti, 1.0)

    keep = rng.random(n_hours) >= 0.001
    observations = []
    for i in np.flatnonzero(keep):
        d = days[day_idx[i]]
        h = int(hours[i])
        if _dst_gap(d) == h:
            continue
        observations.append(TtiObservation(datetime(d.year, d.month, d.day, h), float(tti[i])))
    return observations, weather
