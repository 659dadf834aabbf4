"""Figure rendering for ristrack benchmark CSV output."""

from .render import FIGURE_IDS, PlotJob, SchemaError, render

__all__ = ["FIGURE_IDS", "PlotJob", "SchemaError", "render"]
