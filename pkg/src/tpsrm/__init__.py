"""Two-phase switched reluctance motor design toolkit."""

__version__ = "0.1.0"
