"""Eigenvector overlap dynamics of Hermitian matrices under additive Gaussian noise."""
__version__ = "0.1.0"
