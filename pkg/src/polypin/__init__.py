"""Pinned polymer corner-flip dynamics and the free-boundary limits they approach."""

__version__ = "0.1.0"
