"""Spectral analysis of bent and twisted Dirichlet tubes in three dimensions."""

__version__ = "0.1.0"
