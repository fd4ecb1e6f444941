"""Numerical experiments for blow-up in the radial non-local Fisher-KPP equation."""

__version__ = "0.1.0"
