"""Discrete Bayesian-flow sequence generator for molecular and protein strings."""

__version__ = "0.1.0"
