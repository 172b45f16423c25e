"""Numerical monodromy, Stokes data and isomonodromic flows of meromorphic connections."""

__version__ = "0.1.0"
