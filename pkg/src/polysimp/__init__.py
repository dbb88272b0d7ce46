"""Automatic simplification of polyhedral reductions, dependent ones included."""

__version__ = "0.1.0"
