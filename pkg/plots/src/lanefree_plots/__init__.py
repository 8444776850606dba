"""Offline figure generation for lane-free simulator CSV exports."""

from .render import FIGURE_KINDS, PlotSpec, SchemaError, render

__version__ = "0.1.0"
