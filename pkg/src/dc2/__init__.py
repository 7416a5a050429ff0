"""Divide, conquer and combine for high-resolution image understanding."""

__version__ = "0.1.0"
