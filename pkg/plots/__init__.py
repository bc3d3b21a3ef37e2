"""
SVG rendering for curvkit reports.

Drawing goes through QPainter, so a headless Qt platform is selected
unless one is already configured.
"""

import os

os.environ.setdefault("QT_QPA_PLATFORM", "offscreen")

from plots.svg_plot import render_barycentric, render_curves, render_development  # noqa: E402

__all__ = ["render_barycentric", "render_curves", "render_development"]
