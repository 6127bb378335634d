"""Quadtree search for rank-loss points driven by boundary phase sums.

A cell of the parameter plane is tested by continuing the decomposition
around its boundary rectangle in the joint gauge and classifying the
accumulated phase sum: near pi means an enclosed rank-loss point, near
zero means none.  Cells that test positive are split in four until they
are smaller than the localization tolerance, then the determinant zero
inside is polished by a damped Newton iteration and stamped with a
regularity check.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .continuation import ContinuationOptions, GaugeMode
from .embedding import GenericityResult, genericity_det
from .errors import ContinuationFailedError, DomainError
from .linalg import det
from .model import MatrixFamily, Rect, eval_family, rect_loop
from .phase import DEFAULT_CLASS_TOL, Classification, PhaseReport, analyze_loop

DEFAULT_LOC_TOL = 1e-3
DEFAULT_MAX_CELLS = 4096
DEFAULT_LOOP_SAMPLES = 64
NEWTON_MAX_ITER = 50
DEDUPE_FACTOR = 2.0


@dataclass(frozen=True)
class DetectOptions:
    """Tuning knobs for the quadtree detector.

    ``det_tol`` of None means 1e-10 times an automatic determinant scale
    sampled from the root box.  ``inflate_retries`` rectangle inflations
    of 10 percent each absorb boundary degeneracies before a cell is
    given up as inconclusive.
    """

    loc_tol: float = DEFAULT_LOC_TOL
    det_tol: float | None = None
    max_cells: int = DEFAULT_MAX_CELLS
    loop_samples: int = DEFAULT_LOOP_SAMPLES
    class_tol: float = DEFAULT_CLASS_TOL
    inflate: float = 0.1
    inflate_retries: int = 3
    newton_max_iter: int = NEWTON_MAX_ITER
    continuation: ContinuationOptions = field(default_factory=ContinuationOptions)

    def __post_init__(self) -> None:
        if self.loc_tol <= 0.0:
            raise DomainError("loc_tol must be positive")
        if self.det_tol is not None and self.det_tol <= 0.0:
            raise DomainError("det_tol must be positive")
        if self.max_cells < 1:
            raise DomainError("max_cells must be at least 1")
        if self.loop_samples < 8:
            raise DomainError("need at least 8 boundary samples")
        if self.inflate <= 0.0:
            raise DomainError("inflate must be positive")
        if self.inflate_retries < 0:
            raise DomainError("inflate_retries must be non-negative")
        if self.newton_max_iter < 1:
            raise DomainError("newton_max_iter must be at least 1")


@dataclass(frozen=True)
class LoopTestResult:
    """Outcome of one boundary loop test, after any inflations."""

    rect: Rect
    attempts: int
    classification: Classification
    report: PhaseReport | None
    failure: str | None = None


def loop_test(fam: MatrixFamily, rect: Rect, options: DetectOptions | None = None) -> LoopTestResult:
    """Classify a rectangle by the phase sum around its boundary.

    Continuation failures (a boundary passing too close to a degeneracy)
    trigger inflation of the rectangle about its center by 10 percent,
    up to ``inflate_retries`` times; if every attempt fails the cell is
    reported inconclusive rather than raising.
    """
    opts = options if options is not None else DetectOptions()
    current = rect
    last_reason = ""
    attempts = 0
    for attempt in range(opts.inflate_retries + 1):
        attempts = attempt + 1
        loop = rect_loop(current, samples=opts.loop_samples)
        try:
            _, report = analyze_loop(
                fam,
                loop,
                GaugeMode.JOINT,
                opts.continuation,
                class_tol=opts.class_tol,
            )
        except ContinuationFailedError as exc:
            last_reason = str(exc)
            if attempt < opts.inflate_retries:
                current = current.inflated(1.0 + opts.inflate)
            continue
        return LoopTestResult(
            rect=current,
            attempts=attempts,
            classification=report.classification,
            report=report,
        )
    return LoopTestResult(
        rect=current,
        attempts=attempts,
        classification=Classification.INCONCLUSIVE,
        report=None,
        failure=f"continuation failed on every attempt: {last_reason}",
    )


@dataclass(frozen=True)
class DetectedPoint:
    """A polished rank-loss location with its provenance."""

    location: tuple[float, float]
    box: Rect
    polish_residual: float
    polish_iterations: int
    genericity: GenericityResult
    seed_center: tuple[float, float]

    def to_dict(self) -> dict:
        return {
            "xy": [self.location[0], self.location[1]],
            "absdet": self.polish_residual,
            "generic": self.genericity.regular,
            "box": list(self.box.as_tuple()),
            "polish_iterations": self.polish_iterations,
            "seed_center": list(self.seed_center),
            "genericity": self.genericity.to_dict(),
        }


@dataclass(frozen=True)
class InconclusiveCell:
    rect: Rect
    reason: str

    def to_dict(self) -> dict:
        return {"box": list(self.rect.as_tuple()), "reason": self.reason}


@dataclass(frozen=True)
class DetectionResult:
    points: tuple[DetectedPoint, ...]
    cells_tested: int
    inconclusive: tuple[InconclusiveCell, ...]
    budget_exhausted: bool
    det_tol: float


def _auto_det_tol(fam: MatrixFamily, box: Rect) -> float:
    """1e-10 times a determinant scale sampled at the box corners and center."""
    cx, cy = box.center
    probes = [
        (box.xmin, box.ymin),
        (box.xmax, box.ymin),
        (box.xmin, box.ymax),
        (box.xmax, box.ymax),
        (cx, cy),
    ]
    vals = sorted(abs(det(eval_family(fam, p))) for p in probes)
    scale = 1.0 + vals[len(vals) // 2]
    return 1e-10 * scale


def _newton_polish(
    fam: MatrixFamily,
    start: tuple[float, float],
    det_tol: float,
    max_iter: int = NEWTON_MAX_ITER,
) -> tuple[tuple[float, float], float, int, bool]:
    """Damped Newton on (Re det, Im det) from ``start``.

    The Jacobian is the same central-difference stencil the regularity
    check uses.  Steps are halved until |det| decreases; the iteration
    stops at |det| <= det_tol, on a singular Jacobian, or after
    ``max_iter`` rounds.  Returns (location, |det|, iterations, hit_tol).
    """

    def value(p) -> complex:
        return det(eval_family(fam, p))

    xy = np.array([float(start[0]), float(start[1])])
    val = value(xy)
    used = 0
    for _ in range(max_iter):
        if abs(val) <= det_tol:
            return (float(xy[0]), float(xy[1])), abs(val), used, True
        h = 1e-6 * (1.0 + math.hypot(xy[0], xy[1]))
        dx = (value(xy + (h, 0.0)) - value(xy - (h, 0.0))) / (2.0 * h)
        dy = (value(xy + (0.0, h)) - value(xy - (0.0, h))) / (2.0 * h)
        jdet = dx.real * dy.imag - dy.real * dx.imag
        jscale = max(abs(dx), abs(dy))
        if abs(jdet) <= 1e-14 * max(jscale * jscale, 1e-300):
            break
        sx = (-val.real * dy.imag + dy.real * val.imag) / jdet
        sy = (-dx.real * val.imag + val.real * dx.imag) / jdet
        lam = 1.0
        improved = False
        for _ in range(30):
            cand = xy + lam * np.array([sx, sy])
            cval = value(cand)
            if abs(cval) < abs(val):
                xy, val = cand, cval
                improved = True
                used += 1
                break
            lam *= 0.5
        if not improved:
            break
    return (float(xy[0]), float(xy[1])), abs(val), used, abs(val) <= det_tol


def _dedupe(points: list[DetectedPoint], radius: float) -> tuple[DetectedPoint, ...]:
    """Merge lineages that converged to the same location.

    A corner-straddling point is found by up to four sibling lineages;
    keep the copy with the smallest |det| among any within ``radius``.
    """
    kept: list[DetectedPoint] = []
    for p in sorted(points, key=lambda q: q.polish_residual):
        if all(math.dist(p.location, k.location) > radius for k in kept):
            kept.append(p)
    kept.sort(key=lambda q: q.location)
    return tuple(kept)


def detect(fam: MatrixFamily, box: Rect, options: DetectOptions | None = None) -> DetectionResult:
    """Locate generic rank-loss points of the family inside ``box``.

    Breadth-first quadtree refinement: cells whose boundary phase sum
    reads pi are split until smaller than ``loc_tol``, then polished.
    The search stops early once ``max_cells`` loop tests have run, and
    the partial result is flagged.
    """
    opts = options if options is not None else DetectOptions()
    if box.width <= 0.0 or box.height <= 0.0:
        raise DomainError("search box must have positive area")
    det_tol = opts.det_tol if opts.det_tol is not None else _auto_det_tol(fam, box)

    queue: deque[Rect] = deque([box])
    candidates: list[DetectedPoint] = []
    inconclusive: list[InconclusiveCell] = []
    cells_tested = 0
    budget_exhausted = False

    while queue:
        if cells_tested >= opts.max_cells:
            budget_exhausted = True
            break
        cell = queue.popleft()
        result = loop_test(fam, cell, opts)
        cells_tested += 1
        if result.classification is Classification.NO_RANK_LOSS:
            continue
        if result.classification is Classification.INCONCLUSIVE:
            if result.failure is not None:
                reason = result.failure
            else:
                reasons = result.report.diagnostics.get("reasons", [])
                reason = "; ".join(reasons) if reasons else (
                    f"phase sum {result.report.sum_mod_2pi:+.4f} in the guard band"
                )
            inconclusive.append(InconclusiveCell(rect=cell, reason=reason))
            continue
        if cell.diameter > opts.loc_tol:
            queue.extend(cell.split4())
            continue
        seed = cell.center
        location, residual, iters, hit = _newton_polish(
            fam, seed, det_tol, opts.newton_max_iter
        )
        if not hit:
            inconclusive.append(
                InconclusiveCell(
                    rect=cell,
                    reason=f"polish stalled at |det| = {residual:.3e} > {det_tol:.3e}",
                )
            )
            continue
        final_box = result.rect
        if not final_box.contains(location):
            half = opts.loc_tol
            final_box = Rect(
                location[0] - half, location[0] + half,
                location[1] - half, location[1] + half,
            )
        candidates.append(
            DetectedPoint(
                location=location,
                box=final_box,
                polish_residual=residual,
                polish_iterations=iters,
                genericity=genericity_det(fam, location),
                seed_center=seed,
            )
        )

    return DetectionResult(
        points=_dedupe(candidates, DEDUPE_FACTOR * opts.loc_tol),
        cells_tested=cells_tested,
        inconclusive=tuple(inconclusive),
        budget_exhausted=budget_exhausted,
        det_tol=det_tol,
    )


def detection_to_dict(result: DetectionResult) -> dict:
    """Structured export of a detection run."""
    return {
        "points": [p.to_dict() for p in result.points],
        "inconclusive": [c.to_dict() for c in result.inconclusive],
        "cells_tested": result.cells_tested,
        "budget_exhausted": result.budget_exhausted,
        "det_tol": result.det_tol,
    }


__all__ = [
    "DetectOptions",
    "LoopTestResult",
    "loop_test",
    "DetectedPoint",
    "InconclusiveCell",
    "DetectionResult",
    "detect",
    "detection_to_dict",
]
