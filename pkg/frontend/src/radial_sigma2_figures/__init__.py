"""Figure rendering for radial-sigma2 run artifacts."""

__version__ = "0.1.0"

from .render import FigureSpec, render

__all__ = ["FigureSpec", "render", "__version__"]
