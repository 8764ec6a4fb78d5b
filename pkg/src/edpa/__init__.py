"""Elliptic determinantal processes on a circle: theta functions, drifts,
kernels and Monte Carlo checks."""

__version__ = "0.1.0"
