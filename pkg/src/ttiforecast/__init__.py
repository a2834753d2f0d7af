"""Network travel-time-index forecasting toolkit."""

__version__ = "0.1.0"
