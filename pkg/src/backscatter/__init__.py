"""Numerical laboratory for backscattering Born approximations."""

__version__ = "0.1.0"
