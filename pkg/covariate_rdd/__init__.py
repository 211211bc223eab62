"""Covariate-adjusted sharp regression discontinuity estimation by local polynomial least squares."""

__version__ = "0.1.0"
