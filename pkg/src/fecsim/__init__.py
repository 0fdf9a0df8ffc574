"""Adaptive FEC with unequal error protection for video over lossy links: a seeded simulation library."""

__version__ = "0.1.0"
