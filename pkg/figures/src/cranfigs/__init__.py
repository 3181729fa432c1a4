"""Plots for cranopt sweep output. Reads the CSV contract only."""

from cranfigs.render import FIGURES, SchemaError, figure_series, load_rows, render

__all__ = ["FIGURES", "SchemaError", "figure_series", "load_rows", "render"]

__version__ = "0.1.0"
