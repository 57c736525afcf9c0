"""Regularized dual dynamic programming for DR-MCO problems."""
__version__ = "0.1.0"
