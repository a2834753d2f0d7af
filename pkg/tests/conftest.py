from datetime import date, datetime, timedelta

import numpy as np
import pytest

from ttiforecast.features import assemble
from ttiforecast.ingest import WEATHER_COLUMNS, WeatherDay, join_tti_weather, synthesize_dataset

# generator range and seed used for full-scale checks
FULL_START = date(2010, 1, 1)
FULL_END = date(2016, 6, 26)


def weather_values(**overrides):
    """A valid 34-value weather row (dry, mild day) with named overrides."""
    base = {name: 0.0 for name in WEATHER_COLUMNS}
    for stem, (lo, mid, hi) in {
        "temperature": (5.0, 10.0, 15.0), "dew_point": (1.0, 4.0, 6.0),
        "humidity": (40.0, 60.0, 80.0), "pressure": (1010.0, 1015.0, 1020.0),
        "visibility": (6.0, 9.0, 10.0), "wind_speed": (2.0, 8.0, 15.0),
    }.items():
        base[f"{stem}_min"], base[f"{stem}_mean"], base[f"{stem}_max"] = lo, mid, hi
    base["wind_gust_max"] = 25.0
    base["cloud_cover_mean"] = 0.4
    base["heating_degree_days"] = 8.3
    base["sunshine_hours"] = 6.0
    base.update(overrides)
    return tuple(float(base[name]) for name in WEATHER_COLUMNS)


def weather_day(day, **overrides):
    return WeatherDay(day, weather_values(**overrides))


def hourly(start, hours, tti=1.2):
    """Timestamps ``start`` + 0..hours-1 h with constant (or callable) TTI."""
    out = []
    for h in range(hours):
        ts = start + timedelta(hours=h)
        out.append((ts, tti(ts) if callable(tti) else tti))
    return out


@pytest.fixture(scope="session")
def full_data():
    """Generator output over the full default range (seed 1)."""
    return synthesize_dataset(FULL_START, FULL_END, 1)


@pytest.fixture(scope="session")
def full_records(full_data):
    return join_tti_weather(*full_data)


@pytest.fixture(scope="session")
def short_matrix(full_records):
    return assemble(full_records, "short_term")


@pytest.fixture(scope="session")
def long_matrix(full_records):
    return assemble(full_records, "long_term")


@pytest.fixture(scope="session")
def small_records():
    obs, weather = synthesize_dataset(date(2014, 1, 1), date(2014, 4, 30), 7)
    return join_tti_weather(obs, weather)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def at(y, m, d, h=0):
    return datetime(y, m, d, h)


# one line per acceptance criterion, appended by tests/test_acceptance.py
CRITERIA_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if CRITERIA_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(CRITERIA_LINES):
            terminalreporter.write_line(CRITERIA_LINES[key])
