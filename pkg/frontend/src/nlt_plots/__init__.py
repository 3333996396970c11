"""Figures from nltransport simulator outputs."""

__version__ = "0.1.0"

from .render import FIGURE_KINDS, FigureSpec, SchemaVersionError, render

__all__ = ["__version__", "FIGURE_KINDS", "FigureSpec", "SchemaVersionError", "render"]
