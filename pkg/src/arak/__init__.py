"""Arak polygonal Markov fields: samplers, contour measures and diagnostics."""

__version__ = "0.1.0"
