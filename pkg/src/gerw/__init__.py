"""Generalized elephant random walk: exact sequences, moments, simulation and regime checks."""

__version__ = "0.1.0"
