"""Truncated-Fock-space toolkit for predictive and retrodictive laser-light experiments."""

__version__ = "0.1.0"
