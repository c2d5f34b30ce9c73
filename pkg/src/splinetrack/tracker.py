"""Joint all-frames registration of closed quadratic splines to boundary candidates.

The state is an ``(F, N, 2)`` array of control points, one closed spline per
frame with a shared control-point count. The cost is the weighted sum of three
least-squares terms:

* closest feature: curve samples minus their nearest boundary candidate,
* acceleration: cyclic second difference of each control point over frames,
* curvature: second derivative of every Bezier segment.

Correspondences are frozen while Levenberg-Marquardt runs (which makes every
residual linear in the control points) and refreshed in an outer ICP loop.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import MatrixRankWarning, spsolve

from .boundary import BoundaryCandidateSet, EmptyRegionError, nearest_many
from .curve_model import (
    ClosedQuadSpline,
    fit_circle_template,
    sample_positions,
    sample_weights,
    subdivide,
)

logger = logging.getLogger(__name__)

DIAG_FLOOR = 1e-12
FD_STEP = 1e-6
_LAMBDA_MAX = 1e16


@dataclass(frozen=True)
class TrackerConfig:
    rho_cf: float = 10.0
    rho_ac: float = 1.0
    rho_cv: float = 0.1
    samples_per_segment: int = 8
    passes: int = 3
    initial_control_points: int = 8
    outer_iterations_per_pass: int = 10
    outer_tolerance_px: float = 0.05
    lm_max_iterations: int = 50
    lm_lambda_init: float = 1e-3
    lm_lambda_up: float = 10.0
    lm_lambda_down: float = 0.1
    lm_relative_cost_tol: float = 1e-6

    def __post_init__(self):
        for name, value in vars(self).items():
            if not value > 0:
                raise ValueError(f"TrackerConfig.{name} must be positive, got {value!r}")
        if self.initial_control_points < 3:
            raise ValueError("initial_control_points must be >= 3")


@dataclass(frozen=True)
class SplineSequence:
    """Per-frame closed splines sharing N control points, stored as ``(F, N, 2)``."""

    control_points: np.ndarray

    def __post_init__(self):
        X = np.array(self.control_points, dtype=float)
        if X.ndim != 3 or X.shape[2] != 2:
            raise ValueError(f"control points must have shape (F, N, 2), got {X.shape}")
        if X.shape[1] < 3:
            raise ValueError("each frame needs at least 3 control points")
        X.setflags(write=False)
        object.__setattr__(self, "control_points", X)

    @property
    def n_frames(self) -> int:
        return self.control_points.shape[0]

    @property
    def n_control_points(self) -> int:
        return self.control_points.shape[1]

    def frame(self, t: int) -> ClosedQuadSpline:
        return ClosedQuadSpline(self.control_points[t])

    def splines(self) -> list[ClosedQuadSpline]:
        return [self.frame(t) for t in range(self.n_frames)]

    def subdivide(self) -> SplineSequence:
        return SplineSequence(np.stack([subdivide(s).control_points for s in self.splines()]))

    @classmethod
    def replicate(cls, spline: ClosedQuadSpline, n_frames: int) -> SplineSequence:
        return cls(np.repeat(spline.control_points[None], n_frames, axis=0))


@dataclass(frozen=True)
class ResidualSystem:
    """Residual vector and sparse Jacobian (triplet form) for one state.

    Rows are ordered closest-feature, then acceleration, then curvature.
    ``term_costs`` holds the unweighted ``(E_cf, E_ac, E_cv)``.
    """

    residuals: np.ndarray
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    shape: tuple
    term_costs: tuple

    def jacobian(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.vals, (self.rows, self.cols)), shape=self.shape)

    @property
    def cost(self) -> float:
        return float(self.residuals @ self.residuals)


@dataclass
class PassReport:
    n_control_points: int
    outer_iters: int = 0
    lm_iterations: int = 0
    converged: bool = False
    E_cf: float = math.nan
    E_ac: float = math.nan
    E_cv: float = math.nan
    mean_distance_px: float = math.nan
    # accepted-step cost sequence of every inner LM solve
    cost_history: list = field(default_factory=list, repr=False)


@dataclass
class TrackReport:
    passes: list

    @property
    def converged(self) -> bool:
        return all(p.converged for p in self.passes)


def parameter_index(n_control_points: int, t, j, c):
    return (t * n_control_points + j) * 2 + c


def row_counts(n_frames: int, n_cp: int, samples_per_segment: int) -> tuple[int, int, int]:
    return 2 * n_frames * n_cp * samples_per_segment, 2 * n_frames * n_cp, 2 * n_frames * n_cp


def jacobian_pattern(n_frames: int, n_cp: int, cfg: TrackerConfig):
    """Triplets ``(rows, cols, vals)`` of the (state-independent) Jacobian."""
    F, N, S = n_frames, n_cp, cfg.samples_per_segment
    n_cf, n_ac, _ = row_counts(F, N, S)
    W = sample_weights(S)
    c = np.arange(2)

    # closest feature: sample (t, p, k) depends on P[p-1], P[p], P[p+1] of frame t
    t, p, k, cc, m = np.meshgrid(np.arange(F), np.arange(N), np.arange(S), c, np.arange(3), indexing="ij")
    rows_cf = ((t * N + p) * S + k) * 2 + cc
    cols_cf = parameter_index(N, t, (p + m - 1) % N, cc)
    vals_cf = math.sqrt(cfg.rho_cf) * W[k, m]

    # acceleration: x[t] - 2 x[t+1] + x[t+2], cyclic in t
    t, j, cc, m = np.meshgrid(np.arange(F), np.arange(N), c, np.arange(3), indexing="ij")
    rows_ac = n_cf + (t * N + j) * 2 + cc
    cols_ac = parameter_index(N, (t + m) % F, j, cc)
    vals_ac = math.sqrt(cfg.rho_ac) * np.array([1.0, -2.0, 1.0])[m]

    # curvature: P[p-1] - 2 P[p] + P[p+1]
    rows_cv = n_cf + n_ac + (t * N + j) * 2 + cc
    cols_cv = parameter_index(N, t, (j + m - 1) % N, cc)
    vals_cv = math.sqrt(cfg.rho_cv) * np.array([1.0, -2.0, 1.0])[m]

    rows = np.concatenate([rows_cf.ravel(), rows_ac.ravel(), rows_cv.ravel()])
    cols = np.concatenate([cols_cf.ravel(), cols_ac.ravel(), cols_cv.ravel()])
    vals = np.concatenate([vals_cf.ravel(), vals_ac.ravel(), vals_cv.ravel()])
    return rows, cols, vals


def residual_blocks(X: np.ndarray, targets: np.ndarray, cfg: TrackerConfig):
    """Weighted residual families ``(cf, ac, cv)`` for state ``X`` and frozen targets.

    Evaluated in the dtype of ``X`` so a finite-difference oracle can run in
    extended precision.
    """
    dt = X.dtype
    u = sample_positions(X, cfg.samples_per_segment)
    cf = np.sqrt(dt.type(cfg.rho_cf)) * (u - targets.astype(dt))
    ac = np.sqrt(dt.type(cfg.rho_ac)) * (np.roll(X, -2, axis=0) - 2 * np.roll(X, -1, axis=0) + X)
    cv = np.sqrt(dt.type(cfg.rho_cv)) * (np.roll(X, 1, axis=1) - 2 * X + np.roll(X, -1, axis=1))
    return cf.ravel(), ac.ravel(), cv.ravel()


def _term_costs(blocks, cfg: TrackerConfig) -> tuple[float, float, float]:
    cf, ac, cv = (float(b @ b) for b in blocks)
    return cf / cfg.rho_cf, ac / cfg.rho_ac, cv / cfg.rho_cv


def correspondences(X: np.ndarray, candidates, samples_per_segment: int) -> np.ndarray:
    """Nearest boundary candidate for every curve sample, shape ``(F, N*S, 2)``."""
    u = sample_positions(X, samples_per_segment)
    return np.stack([nearest_many(candidates[t], u[t]) for t in range(X.shape[0])])


def _check_candidates(candidates, n_frames: int) -> None:
    if len(candidates) != n_frames:
        raise ValueError(f"expected candidates for {n_frames} frames, got {len(candidates)}")
    for t, cand in enumerate(candidates):
        if cand is None or len(cand) == 0:
            raise EmptyRegionError(t)


def assemble(state: SplineSequence, candidates, cfg: TrackerConfig, targets=None) -> ResidualSystem:
    """Residuals and Jacobian at ``state``.

    Correspondences are looked up with the Kd-tree unless ``targets`` (shape
    ``(F, N*S, 2)``) is supplied; either way they are constants of the system.
    """
    X = state.control_points
    F, N = X.shape[:2]
    if targets is None:
        _check_candidates(candidates, F)
        targets = correspondences(X, candidates, cfg.samples_per_segment)
    blocks = residual_blocks(X, targets, cfg)
    rows, cols, vals = jacobian_pattern(F, N, cfg)
    m = sum(row_counts(F, N, cfg.samples_per_segment))
    return ResidualSystem(
        residuals=np.concatenate(blocks),
        rows=rows,
        cols=cols,
        vals=vals,
        shape=(m, 2 * N * F),
        term_costs=_term_costs(blocks, cfg),
    )


class StepFailed(ArithmeticError):
    """The damped normal equations could not be solved; raise lambda and retry."""


def _damped_solve(JtJ: sp.csc_matrix, gradient: np.ndarray, lam: float) -> np.ndarray:
    d = JtJ.diagonal().copy()
    d[d == 0.0] = DIAG_FLOOR
    A = (JtJ + sp.diags(lam * d)).tocsc()
    with warnings.catch_warnings():
        warnings.simplefilter("error", MatrixRankWarning)
        try:
            delta = spsolve(A, -gradient)
        except (MatrixRankWarning, RuntimeError) as exc:
            raise StepFailed(str(exc)) from None
    if not np.all(np.isfinite(delta)):
        raise StepFailed("non-finite step")
    return np.atleast_1d(delta)


def lm_step(system: ResidualSystem, lam: float) -> np.ndarray:
    """Marquardt step: solve ``(J'J + lam diag(J'J)) delta = -J' r``."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    J = system.jacobian()
    return _damped_solve((J.T @ J).tocsc(), J.T @ system.residuals, lam)


def _lm_solve(X, targets, JtJ, Jt, cfg: TrackerConfig):
    """Inner LM loop with frozen correspondences.

    Returns the new state, number of iterations, whether the cap was hit, and
    the cost after every accepted step (starting with the initial cost).
    """
    shape = X.shape
    r = np.concatenate(residual_blocks(X, targets, cfg))
    cost = float(r @ r)
    history = [cost]
    lam = cfg.lm_lambda_init
    iters = 0
    converged = False
    while iters < cfg.lm_max_iterations:
        iters += 1
        if cost == 0.0:
            converged = True
            break
        try:
            delta = _damped_solve(JtJ, Jt @ r, lam)
        except StepFailed:
            lam *= cfg.lm_lambda_up
            if lam > _LAMBDA_MAX:
                break
            continue
        X_new = X + delta.reshape(shape)
        r_new = np.concatenate(residual_blocks(X_new, targets, cfg))
        new_cost = float(r_new @ r_new)
        if new_cost < cost:
            rel = (cost - new_cost) / cost
            X, r, cost = X_new, r_new, new_cost
            history.append(cost)
            lam = max(lam * cfg.lm_lambda_down, 1e-300)
            if rel < cfg.lm_relative_cost_tol:
                converged = True
                break
        else:
            if new_cost - cost <= cfg.lm_relative_cost_tol * cost:
                # at the minimum up to rounding
                converged = True
                break
            lam *= cfg.lm_lambda_up
            if lam > _LAMBDA_MAX:
                break
    for a, b in zip(history, history[1:]):
        assert b <= a, "accepted LM step increased the cost"
    return X, iters, not converged, history


def solve_pass(state: SplineSequence, candidates, cfg: TrackerConfig) -> tuple[SplineSequence, PassReport]:
    """One resolution level: ICP outer loop around a frozen-correspondence LM solve."""
    X = np.array(state.control_points, dtype=float)
    F, N = X.shape[:2]
    S = cfg.samples_per_segment
    _check_candidates(candidates, F)

    rows, cols, vals = jacobian_pattern(F, N, cfg)
    J = sp.csr_matrix((vals, (rows, cols)), shape=(sum(row_counts(F, N, S)), 2 * N * F))
    Jt = J.T.tocsr()
    JtJ = (Jt @ J).tocsc()

    report = PassReport(n_control_points=N)
    for _ in range(cfg.outer_iterations_per_pass):
        report.outer_iters += 1
        before = sample_positions(X, S)
        targets = correspondences(X, candidates, S)
        X, iters, capped, history = _lm_solve(X, targets, JtJ, Jt, cfg)
        report.lm_iterations += iters
        report.cost_history.append(history)
        if capped:
            logger.debug("LM iteration cap hit at N=%d", N)
        movement = np.mean(np.linalg.norm(sample_positions(X, S) - before, axis=-1))
        logger.debug("N=%d outer %d: cost %.6g, movement %.4g px", N, report.outer_iters, history[-1], movement)
        if movement < cfg.outer_tolerance_px:
            report.converged = True
            break

    targets = correspondences(X, candidates, S)
    blocks = residual_blocks(X, targets, cfg)
    report.E_cf, report.E_ac, report.E_cv = _term_costs(blocks, cfg)
    dist = np.linalg.norm(sample_positions(X, S) - targets, axis=-1)
    report.mean_distance_px = float(dist.mean())
    return SplineSequence(X), report


def initial_state(candidates, cfg: TrackerConfig, template_frame: int = 0) -> SplineSequence:
    template = fit_circle_template(candidates[template_frame].points, cfg.initial_control_points)
    return SplineSequence.replicate(template, len(candidates))


def track_sequence(candidates, cfg: TrackerConfig | None = None, template_frame: int = 0):
    """Multi-pass tracking; the spline is subdivided between passes.

    Every frame starts from the circle template fitted to the candidates of
    ``template_frame``. Returns ``(SplineSequence, TrackReport)``.
    """
    cfg = cfg or TrackerConfig()
    if len(candidates) < 2:
        raise ValueError(f"tracking needs at least 2 frames, got {len(candidates)}")
    _check_candidates(candidates, len(candidates))
    state = initial_state(candidates, cfg, template_frame)
    reports = []
    for k in range(cfg.passes):
        if k > 0:
            state = state.subdivide()
        state, rep = solve_pass(state, candidates, cfg)
        logger.info(
            "pass %d (N=%d): %d outer iterations, E_cf=%.4g E_ac=%.4g E_cv=%.4g",
            k + 1, rep.n_control_points, rep.outer_iters, rep.E_cf, rep.E_ac, rep.E_cv,
        )
        reports.append(rep)
    return state, TrackReport(reports)


def jacobian_errors(
    state: SplineSequence,
    candidates,
    cfg: TrackerConfig,
    seed: int = 0,
    max_columns: int = 256,
    fault: float = 0.0,
) -> dict[str, float]:
    """Max relative error of the analytic Jacobian per residual family.

    Correspondences are snapshotted at ``state``; the Jacobian is then compared
    at a random perturbation of ``state`` against central differences with
    step ``FD_STEP``, evaluated in extended precision. ``fault`` is added to
    every analytic closest-feature entry (a negative-control hook).
    """
    rng = np.random.default_rng(seed)
    X0 = state.control_points
    F, N = X0.shape[:2]
    S = cfg.samples_per_segment
    targets = correspondences(X0, candidates, S)
    X = X0 + rng.normal(scale=0.5, size=X0.shape)

    rows, cols, vals = jacobian_pattern(F, N, cfg)
    n_cf, n_ac, n_cv = row_counts(F, N, S)
    vals = vals + np.where(rows < n_cf, fault, 0.0)
    J = sp.csr_matrix((vals, (rows, cols)), shape=(n_cf + n_ac + n_cv, 2 * N * F)).tocsc()

    n_params = 2 * N * F
    columns = np.arange(n_params)
    if n_params > max_columns:
        columns = np.sort(rng.choice(n_params, size=max_columns, replace=False))

    Xl = X.astype(np.longdouble)
    flat = Xl.reshape(-1)
    err = np.zeros(n_cf + n_ac + n_cv)
    for col in columns:
        plus = flat.copy()
        minus = flat.copy()
        plus[col] += FD_STEP
        minus[col] -= FD_STEP
        step = plus[col] - minus[col]
        r_plus = np.concatenate(residual_blocks(plus.reshape(X.shape), targets, cfg))
        r_minus = np.concatenate(residual_blocks(minus.reshape(X.shape), targets, cfg))
        fd = ((r_plus - r_minus) / step).astype(float)
        analytic = J[:, col].toarray().ravel()
        err = np.maximum(err, np.abs(fd - analytic) / np.maximum(1.0, np.abs(analytic)))
    return {
        "cf": float(err[:n_cf].max()),
        "ac": float(err[n_cf : n_cf + n_ac].max()),
        "cv": float(err[n_cf + n_ac :].max()),
    }


def jacobian_check(state: SplineSequence, candidates, cfg: TrackerConfig, seed: int = 0, **kwargs) -> float:
    """Largest relative analytic-vs-finite-difference Jacobian error over all rows."""
    return max(jacobian_errors(state, candidates, cfg, seed, **kwargs).values())
