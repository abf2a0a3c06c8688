"""Static figure rendering for subemb experiment CSV reports."""

__version__ = "0.1.0"

from .render import PlotSpec, RenderResult, SchemaError, render_report
