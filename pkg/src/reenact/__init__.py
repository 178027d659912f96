"""Desk-scale video portrait reenactment pipeline."""

__version__ = "0.1.0"
