"""Hierarchical frontier exploration on a 2D grid: simulator, planners, tracker, calibration."""

__version__ = "0.1.0"
