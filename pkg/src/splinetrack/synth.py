"""Synthetic contracting-annulus phantoms with analytically known strain.

The LV blood pool in frame ``t`` is the disk of radius
``r(t) = R (1 - a sin^2(pi t / F))`` and the myocardium the ring around it of
thickness ``W r(0) / r(t)``, so the wall thickens as the cavity contracts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .boundary import LabelMaskSequence

RV_RADIUS_FRACTION = 0.6


@dataclass(frozen=True)
class PhantomConfig:
    width: int = 128
    height: int = 128
    n_frames: int = 25
    center: tuple | None = None
    lv_endo_radius: float = 20.0
    lv_wall_thickness: float = 8.0
    amplitude: float = 0.25
    rv_enabled: bool = False
    seed: int = 1
    jitter_px: float = 0.0
    pixel_spacing: tuple = (1.0, 1.0)
    frame_interval_ms: float = 0.0

    def __post_init__(self):
        if self.n_frames < 2:
            raise ValueError(f"a phantom needs at least 2 frames, got {self.n_frames}")
        if self.width < 8 or self.height < 8:
            raise ValueError(f"image too small: {self.width}x{self.height}")
        if not 0.0 <= self.amplitude < 1.0:
            raise ValueError(f"amplitude must lie in [0, 1), got {self.amplitude}")
        if self.lv_endo_radius <= 0 or self.lv_wall_thickness <= 0:
            raise ValueError("radius and wall thickness must be positive")
        if self.lv_endo_radius + self.lv_wall_thickness >= min(self.width, self.height) / 2 - 2:
            raise ValueError(
                f"R_e + W = {self.lv_endo_radius + self.lv_wall_thickness} does not fit in "
                f"{self.width}x{self.height} (limit {min(self.width, self.height) / 2 - 2})"
            )
        if self.jitter_px < 0:
            raise ValueError("jitter_px must be >= 0")

    @property
    def cxy(self) -> tuple[float, float]:
        if self.center is None:
            return self.width / 2.0, self.height / 2.0
        return float(self.center[0]), float(self.center[1])


@dataclass(frozen=True)
class PhantomTruth:
    center: tuple
    endo_radii: np.ndarray
    epi_radii: np.ndarray
    strain: np.ndarray
    epi_strain: np.ndarray
    peak_strain: float
    peak_frame: int

    def to_dict(self) -> dict:
        return {
            "center": list(self.center),
            "endo_radius": self.endo_radii.tolist(),
            "epi_radius": self.epi_radii.tolist(),
            "strain_percent": self.strain.tolist(),
            "epi_strain_percent": self.epi_strain.tolist(),
            "peak_strain_percent": self.peak_strain,
            "peak_frame": self.peak_frame,
        }


def contraction_profile(n_frames: int, amplitude: float) -> np.ndarray:
    """``1 - a sin^2(pi t / F)``, evaluated symmetrically so t and F-t match exactly."""
    t = np.arange(n_frames)
    phase = np.minimum(t, n_frames - t)
    return 1.0 - amplitude * np.sin(np.pi * phase / n_frames) ** 2


def phantom_truth(cfg: PhantomConfig) -> PhantomTruth:
    endo = cfg.lv_endo_radius * contraction_profile(cfg.n_frames, cfg.amplitude)
    limit = min(cfg.width, cfg.height) / 2.0 - 1.0
    epi = np.minimum(endo + cfg.lv_wall_thickness * endo[0] / endo, limit)
    strain = 100.0 * (endo / endo[0] - 1.0)
    epi_strain = 100.0 * (epi / epi[0] - 1.0)
    return PhantomTruth(
        center=cfg.cxy,
        endo_radii=endo,
        epi_radii=epi,
        strain=strain,
        epi_strain=epi_strain,
        peak_strain=-100.0 * cfg.amplitude,
        peak_frame=int(np.argmin(strain)),
    )


def _jitter(frame: np.ndarray, probability: float, rng: np.random.Generator) -> np.ndarray:
    """Copy a random 4-neighbour's label into boundary pixels with the given probability."""
    h, w = frame.shape
    padded = np.pad(frame, 1, mode="edge")
    neighbours = np.stack([
        padded[:-2, 1:-1], padded[2:, 1:-1], padded[1:-1, :-2], padded[1:-1, 2:],
    ])
    on_edge = np.any(neighbours != frame, axis=0)
    flip = on_edge & (rng.random((h, w)) < probability)
    pick = rng.integers(0, 4, size=(h, w))
    out = frame.copy()
    rows, cols = np.nonzero(flip)
    out[rows, cols] = neighbours[pick[rows, cols], rows, cols]
    return out


def generate_annulus_phantom(cfg: PhantomConfig) -> tuple[LabelMaskSequence, PhantomTruth]:
    truth = phantom_truth(cfg)
    cx, cy = cfg.cxy
    rows, cols = np.mgrid[0 : cfg.height, 0 : cfg.width]
    dist = np.hypot(cols + 0.5 - cx, rows + 0.5 - cy)
    rng = np.random.default_rng(cfg.seed)
    profile = contraction_profile(cfg.n_frames, cfg.amplitude)
    rv0 = RV_RADIUS_FRACTION * truth.epi_radii[0]

    frames = []
    for t in range(cfg.n_frames):
        r, outer = truth.endo_radii[t], truth.epi_radii[t]
        frame = np.zeros((cfg.height, cfg.width), dtype=np.uint8)
        frame[dist < outer] = 1
        frame[dist < r] = 2
        if cfg.rv_enabled:
            # disk overlapping the LV on the -x side; only unlabelled pixels become RV
            rv = rv0 * (0.5 + 0.5 * profile[t])
            rv_dist = np.hypot(cols + 0.5 - (cx - outer - 0.5 * rv), rows + 0.5 - cy)
            frame[(rv_dist < rv) & (frame == 0)] = 3
        if cfg.jitter_px > 0:
            frame = _jitter(frame, min(1.0, 0.25 * cfg.jitter_px), rng)
        frames.append(frame)
    masks = LabelMaskSequence(tuple(frames), cfg.pixel_spacing, cfg.frame_interval_ms)
    return masks, truth


def circle_spline_points(center, radius: float, n_cp: int) -> np.ndarray:
    """Control points evenly spaced on a circle; strain ratios between such
    splines are exact by homogeneity of arc length."""
    theta = 2.0 * np.pi * np.arange(n_cp) / n_cp
    return np.asarray(center, dtype=float) + radius * np.stack([np.cos(theta), np.sin(theta)], axis=1)


def analytic_sequence(truth: PhantomTruth, n_cp: int = 32, epicardial: bool = False):
    from .tracker import SplineSequence

    radii = truth.epi_radii if epicardial else truth.endo_radii
    return SplineSequence(np.stack([circle_spline_points(truth.center, r, n_cp) for r in radii]))


__all__ = [
    "PhantomConfig",
    "PhantomTruth",
    "analytic_sequence",
    "contraction_profile",
    "generate_annulus_phantom",
    "phantom_truth",
]
