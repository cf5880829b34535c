"""Transit accessibility, spatial inequity and per-line equity scores from GTFS."""

__version__ = "0.1.0"
