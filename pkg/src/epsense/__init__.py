"""Quantum Fisher information of quadratic bosonic sensors near exceptional points."""

__version__ = "0.1.0"
