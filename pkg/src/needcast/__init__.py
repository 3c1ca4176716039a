"""Forecast hourly disaster needs from weather and location symbols."""

__version__ = "0.1.0"
