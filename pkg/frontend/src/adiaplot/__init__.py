"""adiaplot: publication-style log-log figures from adiaphase sweep CSVs."""

from .render import PlotSpec, RenderSummary, SchemaError, load_rows, render

__version__ = "0.1.0"
