"""Discounted matrix exponential learning for semidefinite problems and MIMO rate games."""

__version__ = "0.1.0"
