"""Smooth transport of SVD factors along closed parameter loops.

Along a loop gamma(t) the factors of A(gamma(t)) = U S V* are only
determined up to one unimodular phase per column.  Fixing that phase is
a gauge choice, and the choice decides what the factors look like when
the loop closes.  Three gauges are supported:

* ``JOINT``: at each step the common phase of every pair (u_j, v_j) is
  chosen to minimize the joint movement |u - u_prev|^2 + |v - v_prev|^2.
  Equivalently, the combined overlap u_prev* u + v_prev* v is made real
  and non-negative.  In the smooth limit this is the gauge whose
  diagonal generators cancel, H_jj + K_jj = 0, and it is the gauge under
  which the closed-loop phase sum detects rank loss.
* ``U_MVD``: only the u-overlap is made real non-negative (the left
  factor moves minimally; H_jj = 0).
* ``V_MVD``: only the v-overlap (K_jj = 0).

Two transport routes are provided.  ``continue_loop`` is the production
path: a variable-step discrete stepper that refactorizes at each sample
and aligns phases.  ``integrate_loop`` integrates the differential
equations U' = U H, V' = V K, S' = diag(Re W) directly with a classical
4th-order one-step method; it is slower and used as an independent
cross-check of the stepper.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import (
    ContinuationFailedError,
    DomainError,
    NearDegenerateError,
    StepTooLargeError,
)
from .linalg import SVDTriple, svd_point
from .model import (
    MatrixFamily,
    PathLoop,
    eval_derivative,
    eval_family,
    loop_point,
    spectral_gap,
)

MINIMUM_DAE_STEPS = 8


class GaugeMode(Enum):
    JOINT = "joint"
    U_MVD = "umvd"
    V_MVD = "vmvd"


@dataclass(frozen=True)
class GeneratorPair:
    """Skew-Hermitian tangent generators for the left and right factors."""

    left: np.ndarray  # U' = U @ left
    right: np.ndarray  # V' = V @ right


@dataclass(frozen=True)
class ContinuationOptions:
    corr_min: float = 0.99
    growth: float = 1.25
    grow_corr: float = 0.999
    dt_max: float = 1.0 / 64.0
    dt_min: float = 1e-9
    gap_min: float = 1e-8
    sig_min: float = 1e-10

    def __post_init__(self):
        if not (0.0 < self.corr_min < 1.0):
            raise DomainError("corr_min must lie in (0, 1)")
        if self.growth < 1.0:
            raise DomainError("growth must be >= 1")
        if not (0.0 < self.dt_min <= self.dt_max <= 1.0):
            raise DomainError("need 0 < dt_min <= dt_max <= 1")
        if self.gap_min <= 0.0 or self.sig_min <= 0.0:
            raise DomainError("gap_min and sig_min must be positive")


@dataclass(frozen=True)
class ContinuationTrace:
    """Sequence of aligned SVD samples along a loop.

    ``ts[0]`` is 0 and ``ts[-1]`` is 1; for a closed loop both ends sit
    at the same parameter point, and the final frame is aligned to its
    predecessor but deliberately NOT re-phased to the start, so any
    leftover diagonal rotation of the factors is the loop's holonomy.
    Per-sample diagnostic arrays are aligned with ``ts`` (the entries at
    index 0 describe the starting sample).
    """

    gauge: GaugeMode
    ts: np.ndarray
    points: np.ndarray  # shape (len(ts), 2)
    triples: tuple[SVDTriple, ...]
    step_sizes: np.ndarray
    correlations: np.ndarray
    gaps: np.ndarray
    sigma_mins: np.ndarray
    gauge_residuals: np.ndarray
    closed: bool

    @property
    def n(self) -> int:
        return self.triples[0].n

    @property
    def num_samples(self) -> int:
        return len(self.triples)

    @property
    def min_gap(self) -> float:
        return float(np.min(self.gaps))

    @property
    def min_sigma(self) -> float:
        return float(np.min(self.sigma_mins))

    @property
    def min_correlation(self) -> float:
        return float(np.min(self.correlations))

    def to_csv(self) -> str:
        n = self.n
        head = "t,x,y," + ",".join(f"sigma_{j + 1}" for j in range(n))
        lines = [head]
        for k in range(self.num_samples):
            sig = ",".join(repr(float(s)) for s in self.triples[k].sigma)
            lines.append(
                f"{float(self.ts[k])!r},{float(self.points[k, 0])!r},{float(self.points[k, 1])!r},{sig}"
            )
        return "\n".join(lines) + "\n"


def _check_spectrum(sigma: np.ndarray, gap_min: float, sig_min: float) -> None:
    n = sigma.size
    if sigma[-1] < sig_min:
        raise NearDegenerateError(
            f"smallest singular value {sigma[-1]:.3e} below floor {sig_min:.1e}",
            index_pair=(n - 1, n - 1),
        )
    if n >= 2:
        gaps = sigma[:-1] - sigma[1:]
        j = int(np.argmin(gaps))
        if gaps[j] < gap_min:
            raise NearDegenerateError(
                f"singular values {j} and {j + 1} separated by {gaps[j]:.3e}, below floor {gap_min:.1e}",
                index_pair=(j, j + 1),
            )


def tangent_generators(
    triple: SVDTriple,
    a_dot: np.ndarray,
    gauge: GaugeMode,
    *,
    gap_min: float = 1e-8,
    sig_min: float = 1e-10,
) -> GeneratorPair:
    """Skew-Hermitian generators (H, K) of the factor motion for a given A'.

    With W = U* A' V and distinct positive singular values, the
    off-diagonal entries are forced:

        H_jl = (s_l W_jl + s_j conj(W_lj)) / (s_l^2 - s_j^2)
        K_jl = (s_j W_jl + s_l conj(W_lj)) / (s_l^2 - s_j^2)

    The diagonals are purely imaginary and constrained only through
    Im(H_jj - K_jj) = Im(W_jj)/s_j; the split between them is the gauge:
    JOINT balances them, U_MVD zeroes H_jj, V_MVD zeroes K_jj.
    """
    sigma = triple.sigma
    _check_spectrum(sigma, gap_min, sig_min)
    n = triple.n
    w = triple.u.conj().T @ np.asarray(a_dot, dtype=np.complex128) @ triple.v
    h = np.zeros((n, n), dtype=np.complex128)
    k = np.zeros((n, n), dtype=np.complex128)
    for j in range(n):
        for l in range(j + 1, n):
            denom = sigma[l] ** 2 - sigma[j] ** 2
            h[j, l] = (sigma[l] * w[j, l] + sigma[j] * np.conj(w[l, j])) / denom
            h[l, j] = -np.conj(h[j, l])
            k[j, l] = (sigma[j] * w[j, l] + sigma[l] * np.conj(w[l, j])) / denom
            k[l, j] = -np.conj(k[j, l])
    m = np.imag(np.diag(w)) / sigma
    if gauge == GaugeMode.JOINT:
        np.fill_diagonal(h, 0.5j * m)
        np.fill_diagonal(k, -0.5j * m)
    elif gauge == GaugeMode.U_MVD:
        np.fill_diagonal(k, -1j * m)
    else:
        np.fill_diagonal(h, 1j * m)
    return GeneratorPair(left=h, right=k)


def _overlaps(prev: SVDTriple, fresh: SVDTriple) -> tuple[np.ndarray, np.ndarray]:
    zu = np.sum(prev.u.conj() * fresh.u, axis=0)
    zv = np.sum(prev.v.conj() * fresh.v, axis=0)
    return zu, zv


def _alignment(prev: SVDTriple, fresh: SVDTriple, gauge: GaugeMode):
    """Phase factors aligning ``fresh`` to ``prev``, with the step correlation.

    Columns are matched by index: both triples are ordered by descending
    sigma, and distinct singular values keep that order stable across a
    small step.  Returns (factors, min_corr) where min_corr is the
    smallest of the per-column u and v overlap magnitudes and, for the
    JOINT gauge, the combined overlap magnitude scaled to [0, 1].
    """
    zu, zv = _overlaps(prev, fresh)
    if gauge == GaugeMode.JOINT:
        g = zu + zv
        corr = np.minimum(np.minimum(np.abs(zu), np.abs(zv)), 0.5 * np.abs(g))
    elif gauge == GaugeMode.U_MVD:
        g = zu
        corr = np.minimum(np.abs(zu), np.abs(zv))
    else:
        g = zv
        corr = np.minimum(np.abs(zu), np.abs(zv))
    mags = np.abs(g)
    factors = np.where(mags > 0.0, np.conj(g) / np.where(mags > 0.0, mags, 1.0), 1.0 + 0.0j)
    min_corr = float(np.min(corr)) if corr.size else 0.0
    return factors, min_corr


def _gauge_residual(prev: SVDTriple, aligned: SVDTriple, gauge: GaugeMode) -> float:
    zu, zv = _overlaps(prev, aligned)
    g = {GaugeMode.JOINT: zu + zv, GaugeMode.U_MVD: zu, GaugeMode.V_MVD: zv}[gauge]
    worst = 0.0
    for z in g:
        scale = max(abs(z), 1.0)
        worst = max(worst, abs(z.imag) / scale, max(0.0, -z.real) / scale)
    return worst


def align_step(
    prev: SVDTriple,
    fresh: SVDTriple,
    gauge: GaugeMode = GaugeMode.JOINT,
    corr_min: float = 0.99,
) -> SVDTriple:
    """Re-phase ``fresh`` so its gauge-defining overlap with ``prev`` is real >= 0.

    One unimodular factor is applied per column, to u_j and v_j jointly,
    which preserves the factorization.  Raises StepTooLargeError when any
    matching overlap magnitude falls below ``corr_min``.
    """
    if prev.n != fresh.n:
        raise DomainError("triples have different sizes")
    factors, min_corr = _alignment(prev, fresh, gauge)
    if min_corr < corr_min:
        raise StepTooLargeError(
            f"column correlation {min_corr:.6f} fell below corr_min={corr_min}"
        )
    aligned = fresh.with_column_phases(factors)
    resid = _gauge_residual(prev, aligned, gauge)
    if resid > 1e-12:
        raise StepTooLargeError(f"gauge residual {resid:.3e} after alignment")
    return aligned


class _TraceBuilder:
    def __init__(self, gauge: GaugeMode):
        self.gauge = gauge
        self.ts: list[float] = []
        self.points: list[np.ndarray] = []
        self.triples: list[SVDTriple] = []
        self.dts: list[float] = []
        self.corrs: list[float] = []
        self.gaps: list[float] = []
        self.smins: list[float] = []
        self.resids: list[float] = []

    def add(self, t, point, triple, dt, corr, resid):
        self.ts.append(float(t))
        self.points.append(np.asarray(point, dtype=float))
        self.triples.append(triple)
        self.dts.append(float(dt))
        self.corrs.append(float(corr))
        self.gaps.append(spectral_gap(triple.sigma))
        self.smins.append(float(triple.sigma[-1]))
        self.resids.append(float(resid))

    def build(self, closed: bool) -> ContinuationTrace:
        return ContinuationTrace(
            gauge=self.gauge,
            ts=np.array(self.ts),
            points=np.array(self.points),
            triples=tuple(self.triples),
            step_sizes=np.array(self.dts),
            correlations=np.array(self.corrs),
            gaps=np.array(self.gaps),
            sigma_mins=np.array(self.smins),
            gauge_residuals=np.array(self.resids),
            closed=closed,
        )


def continue_loop(
    fam: MatrixFamily,
    loop: PathLoop,
    gauge: GaugeMode = GaugeMode.JOINT,
    opts: ContinuationOptions | None = None,
    *,
    start: SVDTriple | None = None,
) -> ContinuationTrace:
    """Transport the SVD of A(gamma(t)) around the loop with adaptive steps.

    Each proposed sample is refactorized from scratch and phase-aligned
    to the previous frame; a step is rejected (and halved) when the
    spectrum gets too close to degenerate or the column correlation
    falls under ``corr_min``.  Steps grow by ``growth`` after highly
    correlated steps, but never beyond min(dt_max, 1/loop.samples).
    Aborts with ContinuationFailedError once the step underflows
    ``dt_min``, reporting the last good parameter.

    ``start`` substitutes the initial frame (it must factor A(gamma(0)));
    transporting a re-phased start frame re-phases the whole trace by the
    same constant factors.
    """
    opts = opts or ContinuationOptions()
    dt_cap = min(opts.dt_max, 1.0 / loop.samples)
    xi0, _ = loop_point(loop, 0.0)
    a0 = eval_family(fam, xi0)
    triple = start if start is not None else svd_point(a0)
    if start is not None and triple.reconstruction_error(a0) > 1e-8 * max(1.0, float(np.linalg.norm(a0))):
        raise DomainError("start frame does not factor the family at the loop start")
    try:
        _check_spectrum(triple.sigma, opts.gap_min, opts.sig_min)
    except NearDegenerateError as exc:
        raise ContinuationFailedError(
            f"degenerate spectrum at loop start: {exc}", last_t=0.0, reason="start_degenerate"
        ) from exc

    tb = _TraceBuilder(gauge)
    tb.add(0.0, xi0, triple, 0.0, 1.0, 0.0)
    t = 0.0
    dt = dt_cap
    while t < 1.0:
        t_next = min(t + dt, 1.0)
        xi, _ = loop_point(loop, t_next)
        try:
            fresh = svd_point(eval_family(fam, xi))
            _check_spectrum(fresh.sigma, opts.gap_min, opts.sig_min)
            factors, corr = _alignment(triple, fresh, gauge)
            if corr < opts.corr_min:
                raise StepTooLargeError(
                    f"column correlation {corr:.6f} below corr_min={opts.corr_min}"
                )
        except (NearDegenerateError, StepTooLargeError) as exc:
            dt *= 0.5
            if dt < opts.dt_min:
                raise ContinuationFailedError(
                    f"step size underflow near t={t_next:.9f}: {exc}",
                    last_t=t,
                    reason="step_underflow",
                ) from exc
            continue
        aligned = fresh.with_column_phases(factors)
        resid = _gauge_residual(triple, aligned, gauge)
        tb.add(t_next, xi, aligned, t_next - t, corr, resid)
        triple = aligned
        t = t_next
        if corr >= opts.grow_corr:
            dt = min(dt * opts.growth, dt_cap)
    return tb.build(closed=True)


def _polar_unitary(x: np.ndarray) -> np.ndarray:
    """Nearest unitary to x (polar factor), for x already close to unitary."""
    g = x.conj().T @ x
    lam, q = np.linalg.eigh(0.5 * (g + g.conj().T))
    inv_sqrt = q @ np.diag(lam**-0.5) @ q.conj().T
    return x @ inv_sqrt


def integrate_loop(
    fam: MatrixFamily,
    loop: PathLoop,
    gauge: GaugeMode = GaugeMode.JOINT,
    n_steps: int | None = None,
    *,
    gap_min: float = 1e-8,
    sig_min: float = 1e-10,
) -> ContinuationTrace:
    """Integrate U' = UH, V' = VK, S' = diag(Re W) around the loop.

    Classical 4th-order one-step method with a fixed step 1/n_steps; the
    factors are projected back to the unitary group after every step.
    Meant as an independent oracle for ``continue_loop`` on smooth loops
    (for rectangle loops the velocity is discontinuous at corners, which
    degrades the local order).
    """
    n_steps = int(n_steps or loop.samples)
    if n_steps < MINIMUM_DAE_STEPS:
        raise DomainError(f"need at least {MINIMUM_DAE_STEPS} integration steps")
    xi0, _ = loop_point(loop, 0.0)
    t0 = svd_point(eval_family(fam, xi0))
    try:
        _check_spectrum(t0.sigma, gap_min, sig_min)
    except NearDegenerateError as exc:
        raise ContinuationFailedError(
            f"degenerate spectrum at loop start: {exc}", last_t=0.0, reason="start_degenerate"
        ) from exc

    def rhs(t: float, u: np.ndarray, v: np.ndarray, s: np.ndarray):
        xi, vel = loop_point(loop, t)
        a_dot = eval_derivative(fam, xi, vel)
        gen = tangent_generators(
            SVDTriple(u, s, v), a_dot, gauge, gap_min=gap_min, sig_min=sig_min
        )
        w = u.conj().T @ a_dot @ v
        return u @ gen.left, v @ gen.right, np.real(np.diag(w))

    dt = 1.0 / n_steps
    u, v, s = t0.u.copy(), t0.v.copy(), t0.sigma.copy()
    tb = _TraceBuilder(gauge)
    tb.add(0.0, xi0, t0, 0.0, 1.0, 0.0)
    prev = t0
    try:
        for k in range(n_steps):
            t = k * dt
            ku1, kv1, ks1 = rhs(t, u, v, s)
            ku2, kv2, ks2 = rhs(t + 0.5 * dt, u + 0.5 * dt * ku1, v + 0.5 * dt * kv1, s + 0.5 * dt * ks1)
            ku3, kv3, ks3 = rhs(t + 0.5 * dt, u + 0.5 * dt * ku2, v + 0.5 * dt * kv2, s + 0.5 * dt * ks2)
            t_next = 1.0 if k == n_steps - 1 else (k + 1) * dt
            ku4, kv4, ks4 = rhs(t_next, u + dt * ku3, v + dt * kv3, s + dt * ks3)
            u = _polar_unitary(u + (dt / 6.0) * (ku1 + 2.0 * ku2 + 2.0 * ku3 + ku4))
            v = _polar_unitary(v + (dt / 6.0) * (kv1 + 2.0 * kv2 + 2.0 * kv3 + kv4))
            s = s + (dt / 6.0) * (ks1 + 2.0 * ks2 + 2.0 * ks3 + ks4)
            _check_spectrum(s, gap_min, sig_min)
            cur = SVDTriple(u.copy(), s.copy(), v.copy())
            xi, _ = loop_point(loop, t_next)
            zu, zv = _overlaps(prev, cur)
            corr = float(min(np.min(np.abs(zu)), np.min(np.abs(zv))))
            tb.add(t_next, xi, cur, dt, corr, 0.0)
            prev = cur
    except NearDegenerateError as exc:
        raise ContinuationFailedError(
            f"spectrum degenerated during integration: {exc}",
            last_t=tb.ts[-1],
            reason="integration_degenerate",
        ) from exc
    return tb.build(closed=True)


def write_trace_frames(trace: ContinuationTrace, path) -> None:
    """Binary sidecar with the full frames: per sample U then V, row-major
    complex entries as little-endian float64 (re, im) pairs."""
    n = trace.n
    buf = np.empty((trace.num_samples, 2, n, n), dtype="<c16")
    for k, tr in enumerate(trace.triples):
        buf[k, 0] = tr.u
        buf[k, 1] = tr.v
    with open(path, "wb") as fh:
        fh.write(buf.tobytes())


def read_trace_frames(path, n: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Read a sidecar written by ``write_trace_frames`` for size-n frames."""
    raw = np.fromfile(path, dtype="<c16")
    per = 2 * n * n
    if raw.size % per != 0:
        raise DomainError(f"frame file length is not a multiple of one size-{n} record")
    frames = raw.reshape(-1, 2, n, n)
    return [(np.array(f[0]), np.array(f[1])) for f in frames]


__all__ = [
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
]
