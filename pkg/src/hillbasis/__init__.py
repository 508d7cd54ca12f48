"""Riesz-basis diagnostics for Hill and one-dimensional Dirac operators."""
__version__ = "0.1.0"
