"""Smooth SVD continuation along parameter loops, singular-vector phase
accumulation, and rank-loss detection for complex matrix families.

The library follows one pipeline: build a polynomial matrix family,
continue its singular value decomposition smoothly around a closed loop
in the parameter plane under a chosen gauge, read off the per-column
phases the frames accrue, and use the quantized phase sum to find and
polish points where the matrix drops rank.  A Hermitian embedding
supplies independent cross-checks of everything the continuation
computes.
"""
from .continuation import (
    ContinuationOptions,
    ContinuationTrace,
    GaugeMode,
    GeneratorPair,
    align_step,
    continue_loop,
    integrate_loop,
    read_trace_frames,
    tangent_generators,
    write_trace_frames,
)
from .detector import (
    DetectedPoint,
    DetectionResult,
    DetectOptions,
    InconclusiveCell,
    LoopTestResult,
    detect,
    detection_to_dict,
    loop_test,
)
from .embedding import (
    EmbeddingEig,
    GenericityResult,
    ProbeResult,
    discr_limit_probe,
    embedding_discriminant,
    embedding_eigendecomposition,
    genericity_det,
    hermitian_embedding,
    mixing_coefficients,
    sigma_limit_probe,
)
from .errors import (
    ContinuationFailedError,
    DimensionError,
    DomainError,
    NearDegenerateError,
    ParseError,
    RefinementNeededError,
    StepTooLargeError,
)
from .linalg import HermEig, SVDTriple, det, discriminant, herm_eig, svd_point
from .model import (
    FamilyTerm,
    MatrixFamily,
    PathLoop,
    Rect,
    SigmaSurface,
    circle_loop,
    eval_derivative,
    eval_family,
    family_from_dict,
    family_to_dict,
    grid_scan,
    loop_from_dict,
    loop_point,
    loop_to_dict,
    make_family,
    parse_family,
    parse_loop,
    rect_loop,
    serialize_family,
    serialize_loop,
    spectral_gap,
    with_samples,
)
from .phase import (
    Classification,
    PhaseReport,
    accrued_phases,
    analyze_loop,
    classify,
    principal_angle,
    report_to_dict,
    connection_phase,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # linear algebra core
    "SVDTriple",
    "HermEig",
    "svd_point",
    "herm_eig",
    "det",
    "discriminant",
    # families, loops, scans
    "FamilyTerm",
    "MatrixFamily",
    "make_family",
    "family_from_dict",
    "family_to_dict",
    "parse_family",
    "serialize_family",
    "eval_family",
    "eval_derivative",
    "Rect",
    "PathLoop",
    "circle_loop",
    "rect_loop",
    "with_samples",
    "loop_point",
    "loop_from_dict",
    "loop_to_dict",
    "parse_loop",
    "serialize_loop",
    "SigmaSurface",
    "spectral_gap",
    "grid_scan",
    # continuation
    "GaugeMode",
    "GeneratorPair",
    "ContinuationOptions",
    "ContinuationTrace",
    "tangent_generators",
    "align_step",
    "continue_loop",
    "integrate_loop",
    "write_trace_frames",
    "read_trace_frames",
    # phase accounting
    "Classification",
    "PhaseReport",
    "principal_angle",
    "connection_phase",
    "accrued_phases",
    "classify",
    "analyze_loop",
    "report_to_dict",
    # embedding diagnostics
    "EmbeddingEig",
    "GenericityResult",
    "ProbeResult",
    "hermitian_embedding",
    "mixing_coefficients",
    "embedding_eigendecomposition",
    "embedding_discriminant",
    "genericity_det",
    "sigma_limit_probe",
    "discr_limit_probe",
    # detection
    "DetectOptions",
    "LoopTestResult",
    "loop_test",
    "DetectedPoint",
    "InconclusiveCell",
    "DetectionResult",
    "detect",
    "detection_to_dict",
    # errors
    "DimensionError",
    "DomainError",
    "ParseError",
    "NearDegenerateError",
    "StepTooLargeError",
    "ContinuationFailedError",
    "RefinementNeededError",
]
