"""Self-checks against independent oracles, used by ``splinetrack check``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .boundary import Structure, build_candidate_set, sequence_candidates
from .kdtree import linear_scan_nearest
from .synth import PhantomConfig, generate_annulus_phantom
from .tracker import ResidualSystem, SplineSequence, TrackerConfig, initial_state, jacobian_errors, lm_step

JACOBIAN_TOL = 1e-6
LM_TOL = 1e-8


@dataclass
class CheckResult:
    jacobian_error: float
    jacobian_family_errors: dict
    kdtree_mismatches: int
    lm_relative_error: float

    @property
    def ok(self) -> bool:
        return (
            self.jacobian_error < JACOBIAN_TOL
            and self.kdtree_mismatches == 0
            and self.lm_relative_error < LM_TOL
        )


def jacobian_instance(seed: int, n_frames: int = 5, n_cp: int = 8, samples: int = 4):
    """Small phantom plus a randomly displaced template state."""
    rng = np.random.default_rng(seed)
    masks, _ = generate_annulus_phantom(
        PhantomConfig(width=64, height=64, n_frames=n_frames, lv_endo_radius=12.0, lv_wall_thickness=4.0,
                      amplitude=0.2)
    )
    cfg = TrackerConfig(samples_per_segment=samples, initial_control_points=n_cp)
    candidates = sequence_candidates(masks, Structure.LV_ENDO)
    X = initial_state(candidates, cfg).control_points + rng.normal(scale=1.0, size=(n_frames, n_cp, 2))
    return SplineSequence(X), candidates, cfg


def kdtree_mismatches(seed: int, n_points: int = 1000, n_queries: int = 1000, grid: bool = False) -> int:
    """Number of queries where the Kd-tree and a linear scan disagree."""
    rng = np.random.default_rng(seed)
    if grid:
        cells = rng.choice(128 * 128, size=n_points, replace=False)
        pts = np.stack([cells % 128 + 0.5, cells // 128 + 0.5], axis=1)
        queries = rng.integers(0, 257, size=(n_queries, 2)) / 2.0
    else:
        pts = rng.uniform(0, 128, size=(n_points, 2))
        queries = rng.uniform(-10, 138, size=(n_queries, 2))
    tree = build_candidate_set(pts, 0).index
    found = tree.query(queries)
    return sum(int(i != linear_scan_nearest(pts, q)) for i, q in zip(found, queries))


def random_system(rng, m: int = 40, n: int = 12, density: float = 0.4) -> ResidualSystem:
    J = rng.normal(size=(m, n)) * (rng.random((m, n)) < density)
    rows, cols = np.nonzero(J)
    return ResidualSystem(rng.normal(size=m), rows, cols, J[rows, cols], (m, n), (0.0, 0.0, 0.0))


def dense_lm_step(system: ResidualSystem, lam: float) -> np.ndarray:
    J = np.zeros(system.shape)
    np.add.at(J, (system.rows, system.cols), system.vals)
    A = J.T @ J
    d = np.diag(A).copy()
    d[d == 0.0] = 1e-12
    return np.linalg.solve(A + lam * np.diag(d), -J.T @ system.residuals)


def lm_relative_error(seed: int, trials: int = 10) -> float:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        system = random_system(rng)
        lam = 10.0 ** rng.uniform(-4, 2)
        ref = dense_lm_step(system, lam)
        got = lm_step(system, lam)
        worst = max(worst, float(np.linalg.norm(got - ref) / max(np.linalg.norm(ref), 1e-300)))
    return worst


def run_checks(seed: int = 1, jacobian_fault: float = 0.0) -> CheckResult:
    state, candidates, cfg = jacobian_instance(seed)
    families = jacobian_errors(state, candidates, cfg, seed=seed, fault=jacobian_fault)
    mismatches = kdtree_mismatches(seed) + kdtree_mismatches(seed + 1, grid=True)
    return CheckResult(max(families.values()), families, mismatches, lm_relative_error(seed))

