"""Joint all-frames spline tracking of segmentation contours and circumferential strain."""

from .boundary import (
    BoundaryCandidateSet,
    EmptyRegionError,
    LabelMaskSequence,
    MaskFormatError,
    Structure,
    build_candidate_set,
    extract_boundary_candidates,
    load_mask_sequence,
    nearest,
    sequence_candidates,
)
from .curve_model import (
    BezierSegment,
    ClosedQuadSpline,
    arc_length,
    bernstein,
    binomial,
    evaluate_segment,
    fit_circle_template,
    sample,
    segments,
    subdivide,
)
from .strain import StrainCurve, circumferential_strain, strain_to_csv
from .synth import PhantomConfig, PhantomTruth, generate_annulus_phantom
from .tracker import (
    ResidualSystem,
    SplineSequence,
    TrackerConfig,
    assemble,
    jacobian_check,
    lm_step,
    solve_pass,
    track_sequence,
)

__version__ = "0.1.0"
