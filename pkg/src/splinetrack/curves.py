"""Reading and writing ``curves.json`` (tracked spline sequences)."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .curve_model import ClosedQuadSpline, ensure_ccw
from .tracker import SplineSequence, TrackReport


class CurvesFormatError(ValueError):
    pass


@dataclass(frozen=True)
class CurvesFile:
    structure: str
    sequence: SplineSequence
    pixel_spacing: tuple = (1.0, 1.0)
    convergence: dict | None = None


def curves_to_json(seq: SplineSequence, structure: str, pixel_spacing=(1.0, 1.0), report: TrackReport | None = None) -> str:
    doc = {
        "structure": structure,
        "n_frames": seq.n_frames,
        "n_control_points": seq.n_control_points,
        "pixel_spacing_mm": [float(s) for s in pixel_spacing],
        "frames": seq.control_points.tolist(),
    }
    if report is not None:
        doc["convergence"] = {
            "passes": [
                {
                    "outer_iters": p.outer_iters,
                    "E_cf": p.E_cf,
                    "E_ac": p.E_ac,
                    "E_cv": p.E_cv,
                    "n_control_points": p.n_control_points,
                    "converged": p.converged,
                }
                for p in report.passes
            ]
        }
    return json.dumps(doc, indent=1) + "\n"


def parse_curves(text: str) -> CurvesFile:
    """Parse ``curves.json`` text; every frame is normalised to counterclockwise order.

    Raises ``json.JSONDecodeError`` for malformed JSON and
    :class:`CurvesFormatError` for well-formed JSON with the wrong content.
    """
    doc = json.loads(text)
    try:
        frames = np.asarray(doc["frames"], dtype=float)
        structure = str(doc["structure"])
        spacing = tuple(float(s) for s in doc.get("pixel_spacing_mm", (1.0, 1.0)))
    except (KeyError, TypeError, ValueError) as exc:
        raise CurvesFormatError(f"invalid curves document: {exc}") from None
    if frames.ndim != 3 or frames.shape[2] != 2 or frames.shape[1] < 3:
        raise CurvesFormatError(f"frames must have shape (F, N>=3, 2), got {frames.shape}")
    for key, actual in (("n_frames", frames.shape[0]), ("n_control_points", frames.shape[1])):
        if key in doc and doc[key] != actual:
            raise CurvesFormatError(f"{key}={doc[key]} does not match frames ({actual})")
    seq = SplineSequence(np.stack([ensure_ccw(ClosedQuadSpline(f)).control_points for f in frames]))
    return CurvesFile(structure, seq, spacing, doc.get("convergence"))
