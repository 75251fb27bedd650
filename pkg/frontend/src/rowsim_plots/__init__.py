"""Figure generation from rowsim CSV outputs.

This package contains no simulation logic: it reads the CSV schemas the
simulator documents and renders figures from them.
"""

__version__ = "0.1.0"

from .figures import FIGURE_KINDS, FigureSpec, PlotError, render
