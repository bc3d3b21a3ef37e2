import logging
import math
from pathlib import Path

import numpy as np

from PyQt6.QtCore import QPointF, QRectF, QSize, Qt
from PyQt6.QtGui import QColor, QFont, QGuiApplication, QPainter, QPainterPath, QPen
from PyQt6.QtSvg import QSvgGenerator

from curvkit.extension import barycentric_point, simplex_grid
from curvkit.model_plane import ModelSpace

logger = logging.getLogger(__name__)

WIDTH, HEIGHT, MARGIN = 640, 480, 40

BG_COLOR = QColor(22, 22, 28)
GRID_COLOR = QColor(40, 40, 50)
CURVE_COLOR = QColor(40, 180, 250)
ACCENT_COLOR = QColor(250, 60, 100)
GOOD_COLOR = QColor(0, 220, 120)
BAD_COLOR = QColor(255, 60, 80)
POINT_COLOR = QColor(255, 255, 255)
RAY_COLOR = QColor(120, 200, 255, 120)
TEXT_COLOR = QColor(200, 200, 200)

PALETTE = [CURVE_COLOR, ACCENT_COLOR, GOOD_COLOR, QColor(250, 200, 60), QColor(180, 120, 255)]

_app = None


def _application():
    global _app
    _app = QGuiApplication.instance() or QGuiApplication([])
    return _app


def chart(kappa, points):
    """Planar coordinates of model-space points (azimuthal chart about the origin when curved)."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if kappa == 0:
        return points[:, :2]
    r, theta = ModelSpace(kappa, points.shape[1] - 1).to_polar(points)
    return np.column_stack([r * np.cos(theta), r * np.sin(theta)])


class SvgCanvas:
    """Equal-aspect SVG page for planar data on a dark background with a dashed grid."""

    def __init__(self, path, points, title="", width=WIDTH, height=HEIGHT):
        _application()
        self.path = Path(path)
        self.width, self.height = width, height
        self.title = title
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        pts = pts[np.isfinite(pts).all(axis=1)]
        if len(pts) == 0:
            pts = np.zeros((1, 2))
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        span = max(float((hi - lo).max()), 1e-9)
        self.scale = min(width - 2 * MARGIN, height - 2 * MARGIN) / span
        self.center = (lo + hi) / 2

        self.generator = QSvgGenerator()
        self.generator.setFileName(str(self.path))
        self.generator.setSize(QSize(width, height))
        self.generator.setViewBox(QRectF(0, 0, width, height))
        self.generator.setTitle(title)
        self.painter = None

    def to_page(self, x, y):
        return QPointF(self.width / 2 + (x - self.center[0]) * self.scale,
                       self.height / 2 - (y - self.center[1]) * self.scale)

    def __enter__(self):
        p = QPainter()
        if not p.begin(self.generator):
            raise OSError(f"cannot write {self.path}")
        p.setRenderHint(QPainter.RenderHint.Antialiasing)
        p.fillRect(QRectF(0, 0, self.width, self.height), BG_COLOR)
        grid_steps = 8
        p.setPen(QPen(GRID_COLOR, 1, Qt.PenStyle.DashLine))
        for i in range(grid_steps + 1):
            gx = MARGIN + (self.width - 2 * MARGIN) * i / grid_steps
            gy = MARGIN + (self.height - 2 * MARGIN) * i / grid_steps
            p.drawLine(QPointF(gx, 0), QPointF(gx, self.height))
            p.drawLine(QPointF(0, gy), QPointF(self.width, gy))
        if self.title:
            p.setPen(TEXT_COLOR)
            p.setFont(QFont("Arial", 12))
            p.drawText(QPointF(MARGIN, MARGIN * 0.6), self.title)
        self.painter = p
        return self

    def __exit__(self, exc_type, exc, tb):
        self.painter.end()
        self.painter = None
        return False

    def polyline(self, points, color, width=2.0, style=Qt.PenStyle.SolidLine):
        points = np.atleast_2d(points)
        if len(points) < 2:
            return
        path = QPainterPath(self.to_page(*points[0]))
        for x, y in points[1:]:
            path.lineTo(self.to_page(x, y))
        self.painter.setPen(QPen(color, width, style))
        self.painter.setBrush(Qt.BrushStyle.NoBrush)
        self.painter.drawPath(path)

    def segment(self, a, b, color, width=1.0, style=Qt.PenStyle.SolidLine):
        self.painter.setPen(QPen(color, width, style))
        self.painter.drawLine(self.to_page(*a), self.to_page(*b))

    def dot(self, point, color, radius=4.0):
        self.painter.setPen(QPen(color, 1))
        self.painter.setBrush(color)
        self.painter.drawEllipse(self.to_page(*point), radius, radius)

    def label(self, point, text):
        self.painter.setPen(TEXT_COLOR)
        self.painter.setFont(QFont("Arial", 9))
        self.painter.drawText(self.to_page(*point) + QPointF(6, -6), text)


def render_development(development, path, title="development"):
    """Rays from the base point to every vertex, the developed polyline, non-convex vertices in red."""
    rho, theta = np.asarray(development.rho), np.asarray(development.theta)
    pts = np.column_stack([rho * np.cos(theta), rho * np.sin(theta)])
    with SvgCanvas(path, np.vstack([pts, [[0.0, 0.0]]]), title) as canvas:
        for q in pts:
            canvas.segment((0.0, 0.0), q, RAY_COLOR, 1.0, Qt.PenStyle.DashLine)
        canvas.polyline(pts, CURVE_COLOR, 2.5)
        for i, q in enumerate(pts):
            margin = development.margins[i - 1] if 0 < i < len(pts) - 1 else math.inf
            canvas.dot(q, BAD_COLOR if margin < 0 else GOOD_COLOR)
        canvas.dot((0.0, 0.0), POINT_COLOR, 5.0)
        canvas.label((0.0, 0.0), "p")
    logger.info("Wrote %s", path)
    return str(path)


def render_curves(curves, path, title="curves"):
    """Polylines of 2-d curve traces; a dot marks each start."""
    traces = [np.atleast_2d(np.asarray(getattr(c, "points", c), dtype=float))[:, :2] for c in curves]
    every = np.vstack(traces) if traces else np.zeros((1, 2))
    with SvgCanvas(path, every, title) as canvas:
        for k, pts in enumerate(traces):
            color = PALETTE[k % len(PALETTE)]
            canvas.polyline(pts, color)
            canvas.dot(pts[0], color)
    logger.info("Wrote %s", path)
    return str(path)


def render_barycentric(kappa, anchors, path, resolution=8, title="barycentric simplex"):
    """Image of the weight grid under the barycentric map, neighbouring weights joined."""
    A = np.atleast_2d(np.asarray(anchors, dtype=float))
    k = len(A) - 1
    grid = simplex_grid(k, resolution)
    images = {c: barycentric_point(kappa, A, np.asarray(c, dtype=float) / resolution) for c in grid}
    flat = dict(zip(images, chart(kappa, np.array(list(images.values())))))
    anchor_pts = chart(kappa, A)
    with SvgCanvas(path, np.vstack([anchor_pts, np.array(list(flat.values()))]), title) as canvas:
        for c, q in flat.items():
            for i in range(k + 1):
                for j in range(i + 1, k + 1):
                    if c[j] == 0:
                        continue
                    nb = list(c)
                    nb[i] += 1
                    nb[j] -= 1
                    canvas.segment(q, flat[tuple(nb)], CURVE_COLOR, 1.0)
        for q in flat.values():
            canvas.dot(q, ACCENT_COLOR, 2.5)
        for i, a in enumerate(anchor_pts):
            canvas.dot(a, POINT_COLOR, 5.0)
            canvas.label(a, f"a{i}")
    logger.info("Wrote %s", path)
    return str(path)
