"""Publication-style figures from wvtomo sweep CSVs."""

from .render import FIGURE_KINDS, FigureSpec, render
from .schema import SWEEP_COLUMNS, TOMOGRAM_COLUMNS, SchemaError, SweepTable, load_table

__version__ = "0.1.0"

__all__ = [
    "FIGURE_KINDS",
    "FigureSpec",
    "render",
    "SWEEP_COLUMNS",
    "TOMOGRAM_COLUMNS",
    "SchemaError",
    "SweepTable",
    "load_table",
]
