"""Numerical laboratory for the penalized, norm-constrained segregating heat flow."""

__version__ = "0.1.0"
