"""Numerical experiments on complex Hénon maps and their saddle cycles."""

from .core import C2Point, ComposedAutomorphism, EscapeError, HenonFactor, load_map

__version__ = "0.1.0"

__all__ = ["C2Point", "ComposedAutomorphism", "EscapeError", "HenonFactor", "load_map", "__version__"]
