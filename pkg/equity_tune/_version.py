"""Provides equity-tune version information."""

__version__ = "21.3.0"
