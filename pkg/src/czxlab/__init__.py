"""Numerical laboratory for CZX kernels and their dyadic machinery."""

__version__ = "0.1.0"
