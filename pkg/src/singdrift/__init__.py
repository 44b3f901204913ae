"""Numerical laboratory for diffusions with form-bounded singular drift."""

__version__ = "0.1.0"
