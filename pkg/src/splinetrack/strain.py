"""Global circumferential strain from tracked spline contour lengths."""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .curve_model import arc_length


@dataclass(frozen=True)
class StrainCurve:
    """Percent strain per frame relative to ``reference_frame`` (negative = shortening)."""

    structure: object
    reference_frame: int
    values: np.ndarray
    peak: float
    peak_frame: int


def circumferential_strain(seq, reference_frame: int = 0, structure=None) -> StrainCurve:
    """Lagrangian strain ``100 (L(t) - L(ref)) / L(ref)`` of total contour length ``L``."""
    splines = seq.splines()
    F = len(splines)
    if not 0 <= reference_frame < F:
        raise IndexError(f"reference frame {reference_frame} outside [0, {F})")
    lengths = np.array([arc_length(s) for s in splines])
    ref = lengths[reference_frame]
    if not ref > 0.0:
        raise ValueError(f"reference frame {reference_frame} has zero arc length")
    values = 100.0 * (lengths - ref) / ref
    k = int(np.argmin(values))
    return StrainCurve(structure, reference_frame, values, float(values[k]), k)


def strain_to_csv(curve: StrainCurve) -> str:
    out = io.StringIO()
    out.write("frame,strain_percent\n")
    for t, v in enumerate(curve.values):
        out.write(f"{t},{v:.6f}\n")
    out.write(f"# peak,{curve.peak:.6f},frame,{curve.peak_frame}\n")
    return out.getvalue()


def parse_strain_csv(text: str) -> tuple[np.ndarray, float, int]:
    """Inverse of :func:`strain_to_csv`: ``(values, peak, peak_frame)``."""
    values = []
    peak = peak_frame = None
    for line in text.splitlines():
        if not line or line.startswith("frame,"):
            continue
        if line.startswith("# peak,"):
            _, p, _, f = line[2:].split(",")
            peak, peak_frame = float(p), int(f)
            continue
        t, v = line.split(",")
        if int(t) != len(values):
            raise ValueError(f"unexpected frame index {t}")
        values.append(float(v))
    if peak is None:
        raise ValueError("missing peak footer")
    return np.array(values), peak, peak_frame
