"""Discrepancy-based sampling and score-function gradient estimators."""

__version__ = "0.1.0"
