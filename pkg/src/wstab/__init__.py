"""Weighted-geometry stability toolkit for free boundary surfaces."""

__version__ = "0.1.0"
