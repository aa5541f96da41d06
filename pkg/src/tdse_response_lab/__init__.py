"""Numerical lab for mild Schrödinger dynamics and non-equilibrium response."""

__version__ = "0.1.0"
