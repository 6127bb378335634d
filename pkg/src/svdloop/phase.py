"""Closed-loop phase accounting for transported singular vectors.

When a trace closes, each transported column returns to the starting
column up to a unimodular factor.  The arguments of those factors are
the accrued phases.  Under the JOINT gauge their sum is quantized: it
is pi (mod 2pi) exactly when the loop encloses a single generic
rank-loss point of the family, and 0 (mod 2pi) for a loop over a
full-rank region.  That dichotomy is what ``classify`` thresholds.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from numbers import Real

import numpy as np

from .continuation import ContinuationOptions, ContinuationTrace, GaugeMode, continue_loop
from .errors import DomainError, RefinementNeededError
from .model import MatrixFamily, PathLoop, with_samples

# A closed trace whose endpoint overlap matrix has off-diagonal mass above
# this is not column-to-column holonomy and cannot be phased.
ENDPOINT_OFFDIAG_TOL = 1e-6

# Under the JOINT gauge the left and right factors must accrue identical
# phases; disagreement beyond this marks a broken trace.
UV_CONSISTENCY_TOL = 1e-8

DEFAULT_CLASS_TOL = 0.3

# Per-step winding increments at or above this cannot be branch-resolved.
MAX_STEP_INCREMENT = 0.5 * math.pi


class Classification(Enum):
    RANK_LOSS_INSIDE = "rank_loss_inside"
    NO_RANK_LOSS = "no_rank_loss"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class PhaseReport:
    """Accrued phases of one closed trace.

    ``beta`` holds per-column principal phases in (-pi, pi], read off
    the diagonal of U(0)* U(1).  ``connection_sum`` holds the per-column
    totals of the stepwise u-overlap phases, the discrete integral of
    the diagonal u-generator; it is a transport diagnostic, not beta
    plus winding, and is NaN for a column whose sampling was too coarse
    to resolve (a refine reason is recorded then).  ``sum_mod_2pi`` is
    the principal value of sum(beta), and ``residual`` its distance to
    the nearest admissible value (0 or pi).
    """

    beta: np.ndarray
    connection_sum: np.ndarray
    sum_mod_2pi: float
    classification: Classification
    residual: float
    diagnostics: dict


def principal_angle(x: float) -> float:
    """Reduce an angle to the half-open interval (-pi, pi]."""
    y = math.remainder(float(x), math.tau)
    if y <= -math.pi:
        y += math.tau
    return y


def _angle(z: complex) -> float:
    return principal_angle(math.atan2(z.imag, z.real))


def connection_phase(trace: ContinuationTrace, column: int) -> float:
    """Sum of the stepwise u-overlap phases of one column.

    Adds up arg(u_j(t_k)* u_j(t_k+1)) over the stored frames, the
    discrete counterpart of integrating the diagonal entry of the
    u-side gauge generator.  It vanishes identically in the gauge that
    freezes that diagonal and is NOT the endpoint phase beta_j: the
    direction rotation of the column contributes to beta_j but not
    here.  Raises RefinementNeededError when any single increment
    reaches pi/2, since the sampling then cannot resolve the transport.
    """
    if not (0 <= column < trace.n):
        raise DomainError(f"column {column} out of range for size {trace.n}")
    total = 0.0
    for k in range(trace.num_samples - 1):
        z = complex(np.vdot(trace.triples[k].u[:, column], trace.triples[k + 1].u[:, column]))
        inc = _angle(z)
        if abs(inc) >= MAX_STEP_INCREMENT:
            raise RefinementNeededError(
                f"phase increment {inc:.3f} rad at step {k} of column {column}; refine the sampling"
            )
        total += inc
    return total


def _endpoint_offdiag(e: np.ndarray) -> float:
    off = e - np.diag(np.diag(e))
    return float(np.max(np.abs(off))) if e.shape[0] > 1 else 0.0


def accrued_phases(trace: ContinuationTrace, class_tol: float = DEFAULT_CLASS_TOL) -> PhaseReport:
    """Extract per-column accrued phases and classify the closed trace.

    The phases are the arguments of the diagonal of U(0)* U(1).  The
    report is marked inconclusive instead of classified when the trace
    was not produced in the JOINT gauge, when the endpoint overlap is
    not diagonal, when the left and right factors disagree, or when a
    winding branch could not be resolved.
    """
    if not trace.closed:
        raise DomainError("phase accounting requires a closed trace")
    if class_tol <= 0.0 or class_tol >= 0.5 * math.pi:
        raise DomainError("class_tol must lie in (0, pi/2)")
    first, last = trace.triples[0], trace.triples[-1]
    eu = first.u.conj().T @ last.u
    ev = first.v.conj().T @ last.v
    off_u = _endpoint_offdiag(eu)
    off_v = _endpoint_offdiag(ev)

    beta = np.array([_angle(complex(z)) for z in np.diag(eu)])
    beta_v = np.array([_angle(complex(z)) for z in np.diag(ev)])
    uv_mismatch = float(np.max(np.abs([principal_angle(a - b) for a, b in zip(beta, beta_v)])))

    reasons: list[str] = []
    if trace.gauge != GaugeMode.JOINT:
        reasons.append(f"gauge {trace.gauge.value} carries no quantized phase sum")
    if max(off_u, off_v) > ENDPOINT_OFFDIAG_TOL:
        reasons.append(f"endpoint overlap off-diagonal {max(off_u, off_v):.3e} exceeds {ENDPOINT_OFFDIAG_TOL:.0e}")
    if trace.gauge == GaugeMode.JOINT and uv_mismatch > UV_CONSISTENCY_TOL:
        reasons.append(f"left/right phase mismatch {uv_mismatch:.3e} exceeds {UV_CONSISTENCY_TOL:.0e}")

    connection = np.empty(trace.n)
    for j in range(trace.n):
        try:
            connection[j] = connection_phase(trace, j)
        except RefinementNeededError as exc:
            connection[j] = math.nan
            reasons.append(str(exc))

    total = float(np.sum(beta))
    sum_mod = principal_angle(total)
    residual = min(abs(principal_angle(total)), abs(principal_angle(total - math.pi)))

    if reasons:
        classification = Classification.INCONCLUSIVE
    else:
        classification = classify(sum_mod, class_tol)

    diagnostics = {
        "gauge": trace.gauge.value,
        "num_samples": trace.num_samples,
        "endpoint_offdiag_u": off_u,
        "endpoint_offdiag_v": off_v,
        "uv_diag_mismatch": uv_mismatch,
        "beta_v": [float(b) for b in beta_v],
        "min_gap": trace.min_gap,
        "min_sigma": trace.min_sigma,
        "min_correlation": trace.min_correlation,
        "max_gauge_residual": float(np.max(trace.gauge_residuals)),
        "reasons": reasons,
    }
    return PhaseReport(
        beta=beta,
        connection_sum=connection,
        sum_mod_2pi=sum_mod,
        classification=classification,
        residual=float(residual),
        diagnostics=diagnostics,
    )


def classify(report, class_tol: float = DEFAULT_CLASS_TOL) -> Classification:
    """Threshold a phase sum against the admissible values 0 and pi.

    Accepts a PhaseReport or a bare sum.  Sums within ``class_tol`` of
    pi (mod 2pi) mean a rank-loss point inside; within ``class_tol`` of
    0 mean none; anything else, or a report already carrying distrust
    reasons, is inconclusive.
    """
    if isinstance(report, PhaseReport):
        if report.diagnostics.get("reasons"):
            return Classification.INCONCLUSIVE
        value = report.sum_mod_2pi
    elif isinstance(report, Real):
        value = float(report)
    else:
        raise DomainError("classify expects a PhaseReport or a real phase sum")
    if abs(principal_angle(value - math.pi)) <= class_tol:
        return Classification.RANK_LOSS_INSIDE
    if abs(principal_angle(value)) <= class_tol:
        return Classification.NO_RANK_LOSS
    return Classification.INCONCLUSIVE


def analyze_loop(
    fam: MatrixFamily,
    loop: PathLoop,
    gauge: GaugeMode = GaugeMode.JOINT,
    opts: ContinuationOptions | None = None,
    class_tol: float = DEFAULT_CLASS_TOL,
    max_refinements: int = 3,
) -> tuple[ContinuationTrace, PhaseReport]:
    """Continue around the loop and report phases, refining if needed.

    An inconclusive JOINT report triggers up to ``max_refinements``
    reruns with doubled sample counts before the verdict stands.
    Continuation failures propagate to the caller.
    """
    trace = continue_loop(fam, loop, gauge, opts)
    report = accrued_phases(trace, class_tol)
    rounds = 0
    while (
        gauge == GaugeMode.JOINT
        and report.classification == Classification.INCONCLUSIVE
        and rounds < max_refinements
    ):
        rounds += 1
        loop = with_samples(loop, loop.samples * 2)
        trace = continue_loop(fam, loop, gauge, opts)
        report = accrued_phases(trace, class_tol)
    return trace, report


def report_to_dict(report: PhaseReport) -> dict:
    return {
        "beta": [float(b) for b in report.beta],
        "connection_sum": [
            float(b) if math.isfinite(b) else None for b in report.connection_sum
        ],
        "sum_mod_2pi": report.sum_mod_2pi,
        "classification": report.classification.value,
        "residual": report.residual,
        "diagnostics": report.diagnostics,
    }


__all__ = [
    "Classification",
    "PhaseReport",
    "principal_angle",
    "connection_phase",
    "accrued_phases",
    "classify",
    "analyze_loop",
    "report_to_dict",
    "ENDPOINT_OFFDIAG_TOL",
    "UV_CONSISTENCY_TOL",
    "DEFAULT_CLASS_TOL",
]
