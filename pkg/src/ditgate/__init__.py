"""Hyperparallel photonic gates built on cavity-NV dipole-induced transparency."""

__version__ = "0.1.0"
