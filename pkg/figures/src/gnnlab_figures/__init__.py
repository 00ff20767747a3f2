"""Rendering of gnnlab experiment CSVs into publication-style figures.

This package consumes only the CSV files written by the gnnlab CLI
(diagnostics, bounds, and training results); it never recomputes any
quantity, so the measurement pipeline runs fine without it and the figures
are a pure function of file content.
"""

from .render import FigureError, FigureSpec, render

__all__ = ["FigureError", "FigureSpec", "render"]

__version__ = "0.1.0"
