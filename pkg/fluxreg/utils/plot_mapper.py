#!/usr/bin/env python3
"""
plot_mapper.py - SVG diagrams for lab runs
x-t diagrams of fronts and characteristics, solution profiles and decay
plots, drawn with reportlab.graphics and rendered to SVG
"""

import logging
import math
from typing import Dict, List, Sequence, Tuple

import numpy as np
from reportlab.graphics import renderSVG
from reportlab.graphics.shapes import Drawing, Line, PolyLine, String
from reportlab.lib import colors

from ..exceptions import IoError
from .report_mapper import atomic_write

logger = logging.getLogger(__name__)

WIDTH, HEIGHT = 480, 360
MARGIN = 50
FRONT_COLOR = colors.HexColor('#1a237e')
CHARACTERISTIC_COLOR = colors.black
CURVE_COLOR = colors.HexColor('#c62828')


class _Frame:
    """Affine map from data coordinates to the plot box"""

    def __init__(self, x_range: Tuple[float, float], y_range: Tuple[float, float]):
        self.x0, self.x1 = x_range
        self.y0, self.y1 = y_range
        if self.x1 <= self.x0:
            self.x1 = self.x0 + 1.0
        if self.y1 <= self.y0:
            self.y1 = self.y0 + 1.0

    def px(self, x: float) -> float:
        return MARGIN + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - 2 * MARGIN)

    def py(self, y: float) -> float:
        return MARGIN + (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - 2 * MARGIN)

    def points(self, xs: Sequence[float], ys: Sequence[float]) -> List[float]:
        pts: List[float] = []
        for x, y in zip(xs, ys):
            pts.extend([round(self.px(x), 3), round(self.py(y), 3)])
        return pts


def _axes(drawing: Drawing, frame: _Frame, x_label: str, y_label: str) -> None:
    left, right, bottom, top = MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN
    drawing.add(Line(left, bottom, right, bottom, strokeColor=colors.black, strokeWidth=1))
    drawing.add(Line(left, bottom, left, top, strokeColor=colors.black, strokeWidth=1))
    drawing.add(String((left + right) / 2, bottom - 30, x_label, fontSize=10, textAnchor='middle'))
    drawing.add(String(left - 35, (bottom + top) / 2, y_label, fontSize=10, textAnchor='middle'))
    for value, anchor in ((frame.x0, left), (frame.x1, right)):
        drawing.add(String(anchor, bottom - 14, f"{value:.3g}", fontSize=8, textAnchor='middle'))
    for value, anchor in ((frame.y0, bottom), (frame.y1, top)):
        drawing.add(String(left - 6, anchor - 3, f"{value:.3g}", fontSize=8, textAnchor='end'))


def xt_drawing(trajectory, paths=()) -> Drawing:
    """Fronts as blue segments, characteristics as thin black polylines"""
    T = trajectory.T
    support = trajectory.u0.support()
    if support is None:
        x_range = trajectory.domain
    else:
        reach = [f.position(min(f.death, T)) for f in trajectory.fronts.values()]
        x_range = (min([support[0]] + reach), max([support[1]] + reach))
    frame = _Frame(x_range, (0.0, T))
    drawing = Drawing(WIDTH, HEIGHT)
    _axes(drawing, frame, 'x', 't')

    for front in sorted(trajectory.fronts.values(), key=lambda f: f.id):
        t_end = min(front.death, T)
        drawing.add(Line(
            round(frame.px(front.position(front.birth)), 3), round(frame.py(front.birth), 3),
            round(frame.px(front.position(t_end)), 3), round(frame.py(t_end), 3),
            strokeColor=FRONT_COLOR, strokeWidth=1.2,
        ))
    for path in paths:
        ts, xs = zip(*path.vertices)
        drawing.add(PolyLine(frame.points(xs, ts), strokeColor=CHARACTERISTIC_COLOR,
                             strokeWidth=0.4))
    return drawing


def profile_drawing(step_function, t: float = None) -> Drawing:
    bps, vals = step_function.breakpoints, step_function.values
    if len(bps):
        pad = 0.1 * max(bps[-1] - bps[0], 1.0)
        x_range = (float(bps[0]) - pad, float(bps[-1]) + pad)
    else:
        x_range = (-1.0, 1.0)
    frame = _Frame(x_range, (float(vals.min()), float(vals.max())))
    xs, ys = [x_range[0]], [float(vals[0])]
    for x, left, right in zip(bps, vals[:-1], vals[1:]):
        xs.extend([float(x), float(x)])
        ys.extend([float(left), float(right)])
    xs.append(x_range[1])
    ys.append(float(vals[-1]))

    drawing = Drawing(WIDTH, HEIGHT)
    _axes(drawing, frame, 'x', 'u' if t is None else f"u(t={t:.3g})")
    drawing.add(PolyLine(frame.points(xs, ys), strokeColor=FRONT_COLOR, strokeWidth=1))
    return drawing


def decay_drawing(report) -> Drawing:
    """log-log t against lhs with the fitted C*(1 + 1/t) curve"""
    rows = [r for r in report.rows if r.t > 0.0 and r.lhs > 0.0]
    drawing = Drawing(WIDTH, HEIGHT)
    if not rows:
        _axes(drawing, _Frame((0.0, 1.0), (0.0, 1.0)), 'log t', 'log lhs')
        return drawing

    c_star = next((info['C_star'] for info in report.summary.values()
                   if isinstance(info, dict) and 'C_star' in info), None)
    ts = np.asarray([r.t for r in rows])
    grid = np.geomspace(ts.min(), ts.max(), 64)
    curve = c_star * (1.0 + 1.0 / grid) if c_star else np.empty(0)
    values = np.concatenate([[r.lhs for r in rows], curve[curve > 0.0]])
    frame = _Frame((math.log10(ts.min()), math.log10(ts.max())),
                   (math.log10(values.min()), math.log10(values.max())))
    _axes(drawing, frame, 'log10 t', 'log10 lhs')

    for r in rows:
        x, y = frame.px(math.log10(r.t)), frame.py(math.log10(r.lhs))
        color = CHARACTERISTIC_COLOR if r.passed else CURVE_COLOR
        drawing.add(Line(round(x - 3, 3), round(y, 3), round(x + 3, 3), round(y, 3), strokeColor=color))
        drawing.add(Line(round(x, 3), round(y - 3, 3), round(x, 3), round(y + 3, 3), strokeColor=color))
    if len(curve) and np.all(curve > 0.0):
        drawing.add(PolyLine(frame.points(np.log10(grid), np.log10(curve)),
                             strokeColor=CURVE_COLOR, strokeWidth=1))
    return drawing


def emit_plot(artifact: Dict, kind: str, path: str) -> str:
    """
    Write an SVG plot

    Args:
        artifact: {'trajectory', 'paths'} for xt, {'solution', 't'} for
                  profile, {'report'} for decay
        kind: xt | profile | decay
        path: output file

    Returns:
        path
    """
    if kind == 'xt':
        drawing = xt_drawing(artifact['trajectory'], artifact.get('paths', ()))
    elif kind == 'profile':
        drawing = profile_drawing(artifact['solution'], artifact.get('t'))
    elif kind == 'decay':
        drawing = decay_drawing(artifact['report'])
    else:
        raise ValueError(f"Unknown plot kind {kind!r}")
    try:
        svg = renderSVG.drawToString(drawing)
    except OSError as e:
        raise IoError(f"Cannot render {kind} plot: {e}") from e
    atomic_write(path, svg.encode('utf-8') if isinstance(svg, str) else svg)
    logger.info("Wrote %s plot to %s", kind, path)
    return path
