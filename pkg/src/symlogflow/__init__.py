"""Symmetric interval exchanges, special flows under logarithmic roofs,
Rohlin towers and flat-surface cylinder counting."""

__version__ = "0.1.0"
