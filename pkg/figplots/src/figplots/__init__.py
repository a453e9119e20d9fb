"""Figure rendering for the experiment harness CSV outputs."""

from .render import FigureSpec, SchemaError, render

__all__ = ["FigureSpec", "SchemaError", "render"]
