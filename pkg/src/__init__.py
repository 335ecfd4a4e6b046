"""EDLGP - evolutionary deep learning with strongly-typed genetic programming."""

__version__ = "0.1.0"
