"""Closed uniform quadratic B-splines and their quadratic Bezier segments.

A closed spline with N control points ``P`` is made of N quadratic Bezier
segments. Segment ``p`` uses the control points::

    x0 = (P[p-1] + P[p]) / 2,   x1 = P[p],   x2 = (P[p] + P[p+1]) / 2

with indices taken modulo N, so neighbouring segments share an endpoint and
the composite curve is closed and C1. All coordinates are in pixels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "BezierSegment",
    "ClosedQuadSpline",
    "CurveSample",
    "arc_length",
    "bernstein",
    "binomial",
    "ensure_ccw",
    "evaluate_segment",
    "fit_circle_template",
    "sample",
    "sample_weights",
    "segments",
    "signed_area",
    "subdivide",
]

_MAX_BINOMIAL_N = 20


@dataclass(frozen=True)
class BezierSegment:
    x0: np.ndarray
    x1: np.ndarray
    x2: np.ndarray

    def __post_init__(self):
        for name in ("x0", "x1", "x2"):
            value = np.asarray(getattr(self, name), dtype=float)
            if value.shape != (2,) or not np.all(np.isfinite(value)):
                raise ValueError(f"{name} must be a finite 2D point, got {value!r}")
            object.__setattr__(self, name, value)


@dataclass(frozen=True)
class ClosedQuadSpline:
    """Closed quadratic B-spline given by ``(N, 2)`` cyclic control points."""

    control_points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.control_points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError(f"control points must have shape (N, 2), got {pts.shape}")
        if pts.shape[0] < 3:
            raise ValueError(f"a closed spline needs at least 3 control points, got {pts.shape[0]}")
        pts.setflags(write=False)
        object.__setattr__(self, "control_points", pts)

    @property
    def n(self) -> int:
        return self.control_points.shape[0]

    def __len__(self) -> int:
        return self.n


@dataclass(frozen=True)
class CurveSample:
    frame_index: int
    patch_index: int
    r: float
    position: np.ndarray = field(repr=False)


def binomial(n: int, i: int) -> int:
    """Exact binomial coefficient ``n choose i`` for ``0 <= i <= n <= 20``."""
    if not (0 <= n <= _MAX_BINOMIAL_N):
        raise ValueError(f"n must lie in [0, {_MAX_BINOMIAL_N}], got {n}")
    if not 0 <= i <= n:
        raise ValueError(f"i must lie in [0, n={n}], got {i}")
    return math.factorial(n) // (math.factorial(i) * math.factorial(n - i))


def bernstein(i: int, d: int, r: float) -> float:
    """Bernstein basis polynomial ``b_{i,d}(r)``."""
    if not 0 <= i <= d:
        raise ValueError(f"basis index i={i} outside [0, {d}]")
    return binomial(d, i) * (1.0 - r) ** (d - i) * r**i


def evaluate_segment(seg: BezierSegment, r: float, order: int = 0) -> np.ndarray:
    """Position (order 0) or parametric derivative (order 1, 2) of a segment at ``r``."""
    x0, x1, x2 = seg.x0, seg.x1, seg.x2
    if order == 0:
        s = 1.0 - r
        return s * s * x0 + 2.0 * r * s * x1 + r * r * x2
    if order == 1:
        return 2.0 * (1.0 - r) * (x1 - x0) + 2.0 * r * (x2 - x1)
    if order == 2:
        return 2.0 * (x0 - 2.0 * x1 + x2)
    raise ValueError(f"order must be 0, 1 or 2, got {order}")


def _points(spline) -> np.ndarray:
    if isinstance(spline, ClosedQuadSpline):
        return spline.control_points
    return ClosedQuadSpline(spline).control_points


def segment_control_points(control_points: np.ndarray) -> np.ndarray:
    """Bezier control points of every segment, shape ``(N, 3, 2)``."""
    P = np.asarray(control_points, dtype=float)
    prev = np.roll(P, 1, axis=0)
    nxt = np.roll(P, -1, axis=0)
    return np.stack([(prev + P) / 2.0, P, (P + nxt) / 2.0], axis=1)


def segments(spline: ClosedQuadSpline) -> list[BezierSegment]:
    ctrl = segment_control_points(_points(spline))
    return [BezierSegment(c[0], c[1], c[2]) for c in ctrl]


def subdivide(spline: ClosedQuadSpline) -> ClosedQuadSpline:
    """Chaikin corner cutting: N control points become 2N, same limit curve."""
    P = _points(spline)
    nxt = np.roll(P, -1, axis=0)
    out = np.empty((2 * P.shape[0], 2))
    out[0::2] = 0.75 * P + 0.25 * nxt
    out[1::2] = 0.25 * P + 0.75 * nxt
    return ClosedQuadSpline(out)


def sample_weights(samples_per_segment: int) -> np.ndarray:
    """Weights of ``(P[p-1], P[p], P[p+1])`` for the samples ``r = k/S`` of one segment.

    Returns an ``(S, 3)`` array; the position of sample ``k`` in segment ``p``
    is ``W[k] @ P[[p-1, p, p+1]]``.
    """
    if samples_per_segment < 1:
        raise ValueError("samples_per_segment must be >= 1")
    r = np.arange(samples_per_segment) / samples_per_segment
    s = 1.0 - r
    return np.stack([0.5 * s * s, 0.5 * s * s + 2.0 * r * s + 0.5 * r * r, 0.5 * r * r], axis=1)


def sample_positions(control_points: np.ndarray, samples_per_segment: int) -> np.ndarray:
    """Vectorised sample positions, shape ``(..., N*S, 2)``; works on stacked frames."""
    P = np.asarray(control_points)
    W = sample_weights(samples_per_segment).astype(P.dtype)
    prev = np.roll(P, 1, axis=-2)
    nxt = np.roll(P, -1, axis=-2)
    # (..., N, 1, 2) * (S, 1) -> (..., N, S, 2)
    pos = (
        prev[..., :, None, :] * W[:, 0:1]
        + P[..., :, None, :] * W[:, 1:2]
        + nxt[..., :, None, :] * W[:, 2:3]
    )
    return pos.reshape(P.shape[:-2] + (-1, 2))


def sample(spline: ClosedQuadSpline, samples_per_segment: int, frame_index: int = 0) -> list[CurveSample]:
    """Samples at ``r = k/S`` (k < S) on every segment, in segment order."""
    if samples_per_segment < 1:
        raise ValueError("samples_per_segment must be >= 1")
    out = []
    for p, seg in enumerate(segments(spline)):
        for k in range(samples_per_segment):
            r = k / samples_per_segment
            out.append(CurveSample(frame_index, p, r, evaluate_segment(seg, r)))
    return out


def dense_polyline(spline, points_per_segment: int) -> np.ndarray:
    """Closed polyline through ``points_per_segment + 1`` uniform parameters per segment.

    Returns shape ``(N, points_per_segment + 1, 2)``; the last point of each
    segment row equals the first point of the next row.
    """
    ctrl = segment_control_points(_points(spline))
    r = np.linspace(0.0, 1.0, points_per_segment + 1)[:, None]
    s = 1.0 - r
    return s * s * ctrl[:, None, 0] + 2.0 * r * s * ctrl[:, None, 1] + r * r * ctrl[:, None, 2]


def arc_length(spline, points_per_segment: int = 64) -> float:
    """Curve length from the uniformly sampled polyline of every segment."""
    if points_per_segment < 2:
        raise ValueError("points_per_segment must be >= 2")
    poly = dense_polyline(spline, points_per_segment)
    chords = np.diff(poly, axis=1)
    return float(np.sum(np.hypot(chords[..., 0], chords[..., 1])))


def signed_area(control_points) -> float:
    """Shoelace area of the control polygon; positive means counterclockwise."""
    P = np.asarray(control_points, dtype=float)
    nxt = np.roll(P, -1, axis=0)
    return 0.5 * float(np.sum(P[:, 0] * nxt[:, 1] - nxt[:, 0] * P[:, 1]))


def ensure_ccw(spline: ClosedQuadSpline) -> ClosedQuadSpline:
    P = _points(spline)
    if signed_area(P) < 0.0:
        return ClosedQuadSpline(P[::-1])
    return spline if isinstance(spline, ClosedQuadSpline) else ClosedQuadSpline(P)


def fit_circle_template(points, n_cp: int) -> ClosedQuadSpline:
    """Circle of control points at the centroid of ``points`` and their mean radius."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if pts.shape[0] < 3:
        raise ValueError(f"need at least 3 points to fit a template, got {pts.shape[0]}")
    if n_cp < 3:
        raise ValueError(f"n_cp must be >= 3, got {n_cp}")
    c = pts.mean(axis=0)
    radius = float(np.mean(np.hypot(pts[:, 0] - c[0], pts[:, 1] - c[1])))
    theta = 2.0 * np.pi * np.arange(n_cp) / n_cp
    ctrl = c + radius * np.stack([np.cos(theta), np.sin(theta)], axis=1)
    return ensure_ccw(ClosedQuadSpline(ctrl))
