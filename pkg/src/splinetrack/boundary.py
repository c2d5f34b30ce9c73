"""Label-mask ingestion and boundary-candidate extraction.

Masks use the labels 0 (background), 1 (LV myocardium), 2 (LV blood pool)
and 3 (RV blood pool). Candidate points are pixel centres
``(col + 0.5, row + 0.5)``.
"""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .kdtree import KdTree
from .pgm import PGMFormatError, read_pgm, write_pgm

VALID_LABELS = (0, 1, 2, 3)
FRAME_PATTERN = re.compile(r"^frame_(\d{4})\.pgm$")

_CROSS = ndimage.generate_binary_structure(2, 1)


class MaskFormatError(ValueError):
    """A mask file or sequence violates the label-mask format."""


class EmptyRegionError(ValueError):
    """A structure has no pixels in some frame."""

    def __init__(self, frame: int, structure=None):
        self.frame = frame
        self.structure = structure
        name = f" {structure.value}" if structure is not None else ""
        super().__init__(f"frame {frame}: empty{name} region, no boundary candidates")


class Structure(enum.Enum):
    LV_ENDO = "lv-endo"
    LV_EPI = "lv-epi"
    RV_ENDO = "rv-endo"

    def region(self, mask: np.ndarray) -> np.ndarray:
        if self is Structure.LV_ENDO:
            return mask == 2
        if self is Structure.LV_EPI:
            return (mask == 1) | (mask == 2)
        return mask == 3


@dataclass(frozen=True)
class LabelMaskSequence:
    frames: tuple
    pixel_spacing: tuple = (1.0, 1.0)
    frame_interval_ms: float = 0.0

    def __post_init__(self):
        frames = tuple(np.asarray(f) for f in self.frames)
        if len(frames) < 2:
            raise MaskFormatError(f"a mask sequence needs at least 2 frames, got {len(frames)}")
        shape = frames[0].shape
        for t, f in enumerate(frames):
            if f.ndim != 2:
                raise MaskFormatError(f"frame {t}: expected a 2D image, got shape {f.shape}")
            if f.shape != shape:
                raise MaskFormatError(f"frame {t}: dimensions {f.shape} differ from frame 0 {shape}")
            _check_labels(f, t)
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "pixel_spacing", tuple(float(s) for s in self.pixel_spacing))

    @property
    def n_frames(self) -> int:
        return len(self.frames)

    @property
    def height(self) -> int:
        return self.frames[0].shape[0]

    @property
    def width(self) -> int:
        return self.frames[0].shape[1]


@dataclass(frozen=True)
class BoundaryCandidateSet:
    frame_index: int
    points: np.ndarray
    index: KdTree = field(repr=False)

    def __len__(self) -> int:
        return self.points.shape[0]


def _check_labels(frame: np.ndarray, t: int) -> None:
    bad = ~np.isin(frame, VALID_LABELS)
    if bad.any():
        row, col = (int(v) for v in np.argwhere(bad)[0])
        raise MaskFormatError(
            f"frame {t}: invalid label {int(frame[row, col])} at row {row}, column {col}"
        )


def load_mask_sequence(directory) -> LabelMaskSequence:
    """Read ``frame_%04d.pgm`` files (plus optional ``meta.json``) from ``directory``."""
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"mask directory not found: {directory}")
    numbered = {}
    for entry in directory.iterdir():
        m = FRAME_PATTERN.match(entry.name)
        if m:
            numbered[int(m.group(1))] = entry
    if not numbered:
        raise FileNotFoundError(f"no frame_%04d.pgm files in {directory}")
    for expected in range(max(numbered) + 1):
        if expected not in numbered:
            raise FileNotFoundError(f"missing frame index {expected}: frame_{expected:04d}.pgm")

    frames = []
    for t in range(len(numbered)):
        try:
            img = read_pgm(numbered[t])
        except PGMFormatError as exc:
            raise MaskFormatError(str(exc)) from None
        _check_labels(img, t)
        frames.append(img)

    spacing, interval = (1.0, 1.0), 0.0
    meta_path = directory / "meta.json"
    if meta_path.exists():
        try:
            meta = json.loads(meta_path.read_text())
        except json.JSONDecodeError as exc:
            raise MaskFormatError(f"{meta_path}: {exc}") from None
        spacing = tuple(meta.get("pixel_spacing_mm", spacing))
        interval = float(meta.get("frame_interval_ms", interval))
    return LabelMaskSequence(tuple(frames), spacing, interval)


def write_mask_sequence(directory, masks: LabelMaskSequence) -> None:
    """Write ``masks`` in the layout :func:`load_mask_sequence` reads."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for t, frame in enumerate(masks.frames):
        write_pgm(directory / f"frame_{t:04d}.pgm", frame)
    meta = {"pixel_spacing_mm": list(masks.pixel_spacing), "frame_interval_ms": masks.frame_interval_ms}
    (directory / "meta.json").write_text(json.dumps(meta) + "\n")


def largest_component(region: np.ndarray) -> np.ndarray:
    """Largest 4-connected component; ties go to the first one in raster order."""
    labels, n = ndimage.label(region, structure=_CROSS)
    if n == 0:
        return np.zeros_like(region, dtype=bool)
    counts = np.bincount(labels.ravel())
    counts[0] = 0
    return labels == int(np.argmax(counts))


def extract_boundary_candidates(mask, structure: Structure) -> np.ndarray:
    """Pixel-centre boundary points of ``structure``, shape ``(K, 2)``, row-major order.

    A pixel is a candidate when it belongs to the largest 4-connected component
    of the structure's region and one of its 4-neighbours lies outside that
    component or outside the image.
    """
    comp = largest_component(structure.region(np.asarray(mask)))
    interior = ndimage.binary_erosion(comp, structure=_CROSS, border_value=0)
    rows, cols = np.nonzero(comp & ~interior)
    return np.stack([cols + 0.5, rows + 0.5], axis=1).astype(float)


def build_candidate_set(points, t: int) -> BoundaryCandidateSet:
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if pts.shape[0] == 0:
        raise EmptyRegionError(t)
    pts.setflags(write=False)
    return BoundaryCandidateSet(t, pts, KdTree(pts))


def nearest(candidates: BoundaryCandidateSet, q) -> np.ndarray:
    """Closest candidate to ``q``; equidistant ties go to the smallest (row, col)."""
    return candidates.index.nearest(q)


def nearest_many(candidates: BoundaryCandidateSet, queries) -> np.ndarray:
    return candidates.points[candidates.index.query(queries)]


def sequence_candidates(masks: LabelMaskSequence, structure: Structure) -> list[BoundaryCandidateSet]:
    """Candidate sets for every frame; raises :class:`EmptyRegionError` on the first empty frame."""
    out = []
    for t, frame in enumerate(masks.frames):
        pts = extract_boundary_candidates(frame, structure)
        if pts.shape[0] == 0:
            raise EmptyRegionError(t, structure)
        out.append(build_candidate_set(pts, t))
    return out
