"""Figure generation for gmshadow run directories.

Pure post-processing: every figure is a function of the run's CSV/JSON
artifacts, every annotated number is read from the stored reports, and
SVG output is byte-stable across re-renders.
"""

from gmshadow_figures.render import (FIGURE_KINDS, FigureSpec, SchemaError,
                                     UsageError, render)

__version__ = "0.1.0"
