"""SVG overlays of boundary candidates and tracked curves."""

from __future__ import annotations

import numpy as np

from .curve_model import ClosedQuadSpline, dense_polyline

PALETTE = ("#e6194b", "#3cb44b", "#4363d8", "#f58231", "#911eb4", "#42d4f4")
CANDIDATE_COLOR = "#808080"
POINTS_PER_SEGMENT = 16


def _fmt(v: float) -> str:
    s = f"{v:.3f}".rstrip("0").rstrip(".")
    return "0" if s == "-0" else s


def curve_path(spline: ClosedQuadSpline, points_per_segment: int = POINTS_PER_SEGMENT) -> str:
    """Closed SVG path data through ``points_per_segment`` samples per segment."""
    poly = dense_polyline(spline, points_per_segment)[:, :-1].reshape(-1, 2)
    head = f"M{_fmt(poly[0, 0])},{_fmt(poly[0, 1])}"
    rest = " ".join(f"L{_fmt(x)},{_fmt(y)}" for x, y in poly[1:])
    return f"{head} {rest} Z"


def render_frame_svg(width: int, height: int, candidates, curves) -> str:
    """One frame as SVG.

    ``candidates`` is a list of ``(K, 2)`` point arrays drawn as dots;
    ``curves`` a list of splines, each stroked with its own palette color.
    """
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="black"/>',
    ]
    for pts in candidates:
        lines.append(f'<g fill="{CANDIDATE_COLOR}">')
        for x, y in np.asarray(pts).reshape(-1, 2):
            lines.append(f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="0.3"/>')
        lines.append("</g>")
    for i, spline in enumerate(curves):
        color = PALETTE[i % len(PALETTE)]
        lines.append(f'<path d="{curve_path(spline)}" fill="none" stroke="{color}" stroke-width="0.4"/>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
