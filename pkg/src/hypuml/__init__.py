"""Hyperbolic metric learning with uncertainty-adaptive losses."""

__version__ = "0.1.0"
