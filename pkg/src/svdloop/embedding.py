"""Hermitian embedding of a matrix and genericity diagnostics.

The embedding of an n x n matrix A with shift eps is the 2n x 2n
Hermitian matrix

    M(eps) = [[eps I, A], [A*, -eps I]]

whose eigenvalues are +-sqrt(sigma_j^2 + eps^2).  Its eigenvectors are
closed-form mixtures of the singular vectors of A, which gives an
independent route to everything the continuation layer computes and a
family of limit probes for deciding whether a candidate rank-loss point
is generic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DomainError, NearDegenerateError
from .linalg import SVDTriple, as_square_matrix, det, discriminant, svd_point
from .model import MatrixFamily, eval_family

GENERICITY_TOL = 1e-6
DEFAULT_T_VALUES = (1e-2, 1e-3, 1e-4, 1e-5)
STABILIZE_RTOL = 0.05
_NUM_DIRECTIONS = 16


def hermitian_embedding(a, eps: float) -> np.ndarray:
    """Assemble the embedding [[eps I, A], [A*, -eps I]]."""
    a = as_square_matrix(a)
    if not math.isfinite(eps):
        raise DomainError("eps must be finite")
    n = a.shape[0]
    m = np.zeros((2 * n, 2 * n), dtype=np.complex128)
    m[:n, :n] = eps * np.eye(n)
    m[:n, n:] = a
    m[n:, :n] = a.conj().T
    m[n:, n:] = -eps * np.eye(n)
    return m


def mixing_coefficients(sigma, eps: float) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvector mixing weights (c, d) for the embedding at shift eps.

    For each singular value s the positive-branch eigenvector of the
    embedding mixes the left vector with weight c and the right vector
    with weight d, where

        c = s / sqrt(2 r q),   d = q / sqrt(2 r q),
        r = sqrt(s^2 + eps^2), q = r - eps,

    and c^2 + d^2 = 1.  The difference r - eps cancels catastrophically
    for large positive eps, so it is evaluated as s^2 / (r + eps) there.
    Swapping the sign of eps swaps c and d.
    """
    s = np.asarray(sigma, dtype=np.float64)
    scalar = s.ndim == 0
    s = np.atleast_1d(s)
    if np.any(s <= 0.0) or not np.all(np.isfinite(s)):
        raise DomainError("singular values must be positive and finite")
    if not math.isfinite(eps):
        raise DomainError("eps must be finite")
    r = np.hypot(s, eps)
    if eps > 0.0:
        q = s * s / (r + eps)
    else:
        q = r - eps
    denom = np.sqrt(2.0 * r * q)
    c = s / denom
    d = q / denom
    if scalar:
        return c[0], d[0]
    return c, d


@dataclass(frozen=True)
class EmbeddingEig:
    """Closed-form eigendecomposition of the embedding.

    ``w`` is unitary with w* M w = diag(s_plus, -s_plus) where
    s_plus = sqrt(sigma^2 + eps^2); ``c`` and ``d`` are the mixing
    weights used to assemble it.
    """

    w: np.ndarray
    s_plus: np.ndarray
    c: np.ndarray
    d: np.ndarray

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.concatenate([self.s_plus, -self.s_plus])


def embedding_eigendecomposition(
    triple: SVDTriple,
    eps: float,
    *,
    gap_min: float = 1e-8,
    sig_min: float = 1e-10,
) -> EmbeddingEig:
    """Eigenvectors of the embedding assembled from an SVD of A.

    W = [[U C, -U D], [V D, V C]] with C = diag(c), D = diag(d).
    Requires distinct positive singular values; repeated or vanishing
    sigma make the blocks ill-defined and raise NearDegenerateError.
    """
    sigma = triple.sigma
    if sigma[-1] < sig_min:
        raise NearDegenerateError(f"singular value {sigma[-1]:.3e} below {sig_min:.1e}")
    if sigma.size >= 2 and float(np.min(sigma[:-1] - sigma[1:])) < gap_min:
        raise NearDegenerateError("repeated singular values in the embedding")
    c, d = mixing_coefficients(sigma, eps)
    n = triple.n
    w = np.zeros((2 * n, 2 * n), dtype=np.complex128)
    w[:n, :n] = triple.u * c
    w[:n, n:] = -triple.u * d
    w[n:, :n] = triple.v * d
    w[n:, n:] = triple.v * c
    return EmbeddingEig(w=w, s_plus=np.hypot(sigma, eps), c=np.atleast_1d(c), d=np.atleast_1d(d))


def embedding_discriminant(sigma, eps: float) -> float:
    """Discriminant of the embedding's characteristic polynomial.

    Equals 4^n * prod_{j<l} (s_j^2 - s_l^2)^4 * prod_j (s_j^2 + eps^2),
    so it vanishes exactly on repeated singular values or on rank loss
    at eps = 0.
    """
    s = np.atleast_1d(np.asarray(sigma, dtype=np.float64))
    if not np.all(np.isfinite(s)) or np.any(s < 0.0):
        raise DomainError("singular values must be non-negative and finite")
    if not math.isfinite(eps):
        raise DomainError("eps must be finite")
    n = s.size
    out = 4.0**n
    for j in range(n):
        for l in range(j + 1, n):
            diff = s[j] ** 2 - s[l] ** 2
            out *= diff**4
    for j in range(n):
        out *= s[j] ** 2 + eps**2
    return float(out)


@dataclass(frozen=True)
class GenericityResult:
    """Regularity of (Re det A, Im det A) at a candidate point."""

    regular: bool
    jacobian: np.ndarray
    min_singular_value: float
    max_singular_value: float
    det_value: complex
    step: float

    def to_dict(self) -> dict:
        return {
            "regular": self.regular,
            "jacobian": [[float(v) for v in row] for row in self.jacobian],
            "min_singular_value": self.min_singular_value,
            "max_singular_value": self.max_singular_value,
            "det_value": [self.det_value.real, self.det_value.imag],
            "step": self.step,
        }


def genericity_det(fam: MatrixFamily, point, step: float | None = None) -> GenericityResult:
    """Check that the determinant has a regular zero at ``point``.

    Central differences with step h = 1e-6 (1 + |point|) approximate the
    2x2 real Jacobian of (Re det, Im det); the point is regular when the
    Jacobian's smallest singular value clears 1e-6 (1 + largest).
    """
    x, y = float(point[0]), float(point[1])
    h = step if step is not None else 1e-6 * (1.0 + math.hypot(x, y))
    if h <= 0.0:
        raise DomainError("finite-difference step must be positive")

    def det_at(px: float, py: float) -> complex:
        return det(eval_family(fam, (px, py)))

    dx = (det_at(x + h, y) - det_at(x - h, y)) / (2.0 * h)
    dy = (det_at(x, y + h) - det_at(x, y - h)) / (2.0 * h)
    jac = np.array([[dx.real, dy.real], [dx.imag, dy.imag]])
    svals = svd_point(jac).sigma
    smin, smax = float(svals[-1]), float(svals[0])
    return GenericityResult(
        regular=bool(smin >= GENERICITY_TOL * (1.0 + smax)),
        jacobian=jac,
        min_singular_value=smin,
        max_singular_value=smax,
        det_value=det_at(x, y),
        step=h,
    )


@dataclass(frozen=True)
class ProbeResult:
    """Directional limit-ratio probe around a candidate point.

    ``ratios[i, k]`` is the probe quantity for direction i at t_values[k]
    (t decreasing).  A direction is ``stabilized`` when its last two
    ratios agree to 5 percent.  ``verdict`` is one of ``positive``,
    ``degenerate``, ``inconclusive``, or ``not_applicable``.
    """

    kind: str
    directions: np.ndarray
    t_values: tuple[float, ...]
    ratios: np.ndarray
    stabilized: np.ndarray
    min_limit: float
    verdict: str
    applicable: bool = True

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "directions": [[float(v) for v in d] for d in self.directions],
            "t_values": list(self.t_values),
            "ratios": [[float(v) for v in row] for row in self.ratios],
            "stabilized": [bool(b) for b in self.stabilized],
            "min_limit": self.min_limit,
            "verdict": self.verdict,
            "applicable": self.applicable,
        }


def _default_plane_directions() -> np.ndarray:
    ang = 2.0 * math.pi * np.arange(_NUM_DIRECTIONS) / _NUM_DIRECTIONS
    return np.stack([np.cos(ang), np.sin(ang)], axis=1)


def _default_embedded_directions() -> np.ndarray:
    # 16 deterministic directions on the sphere in (x, y, eps) space:
    # 8 equatorial, 3 tilted up, 3 tilted down, both poles.
    dirs = []
    for k in range(8):
        a = 2.0 * math.pi * k / 8.0
        dirs.append([math.cos(a), math.sin(a), 0.0])
    c45 = math.sqrt(0.5)
    for k in range(3):
        a = 2.0 * math.pi * k / 3.0
        dirs.append([c45 * math.cos(a), c45 * math.sin(a), c45])
    for k in range(3):
        a = 2.0 * math.pi * (k + 0.5) / 3.0
        dirs.append([c45 * math.cos(a), c45 * math.sin(a), -c45])
    dirs.append([0.0, 0.0, 1.0])
    dirs.append([0.0, 0.0, -1.0])
    return np.array(dirs)


def _probe_verdict(ratios: np.ndarray, stabilized: np.ndarray) -> tuple[str, float]:
    limits = ratios[:, -1]
    min_limit = float(np.min(limits))
    first = ratios[:, 0]
    vanishing = np.array(
        [r_last <= 0.05 * max(r_first, 1e-300) for r_first, r_last in zip(first, limits)]
    )
    if np.any(vanishing):
        return "degenerate", min_limit
    if np.all(stabilized) and min_limit > 0.0:
        return "positive", min_limit
    return "inconclusive", min_limit


def _stabilized(row: np.ndarray) -> bool:
    a, b = row[-2], row[-1]
    if b == 0.0 and a == 0.0:
        return True
    return abs(b - a) <= STABILIZE_RTOL * max(abs(a), abs(b))


def sigma_limit_probe(
    fam: MatrixFamily,
    point,
    directions: np.ndarray | None = None,
    t_values=DEFAULT_T_VALUES,
) -> ProbeResult:
    """Directional slopes sigma_min(A(point + t v)) / t as t shrinks.

    At a generic rank-loss point every direction stabilizes to a positive
    slope; a higher-order zero drives the ratios to 0 linearly in t.
    """
    x0 = np.asarray(point, dtype=float)
    dirs = _default_plane_directions() if directions is None else np.asarray(directions, dtype=float)
    if dirs.ndim != 2 or dirs.shape[1] != 2:
        raise DimensionError("directions must be vectors in the parameter plane")
    ts = tuple(float(t) for t in t_values)
    if len(ts) < 2 or any(t <= 0.0 for t in ts):
        raise DomainError("need at least two positive t values")
    ratios = np.empty((dirs.shape[0], len(ts)))
    for i, v in enumerate(dirs):
        v = v / np.linalg.norm(v)
        for k, t in enumerate(ts):
            a = eval_family(fam, x0 + t * v)
            ratios[i, k] = svd_point(a).sigma[-1] / t
    stab = np.array([_stabilized(row) for row in ratios])
    verdict, min_limit = _probe_verdict(ratios, stab)
    return ProbeResult(
        kind="sigma_min_slope",
        directions=dirs,
        t_values=ts,
        ratios=ratios,
        stabilized=stab,
        min_limit=min_limit,
        verdict=verdict,
    )


def discr_limit_probe(
    fam: MatrixFamily,
    point,
    directions: np.ndarray | None = None,
    t_values=DEFAULT_T_VALUES,
) -> ProbeResult:
    """Ratios discr(M)/t^2 along rays in embedded (x, y, eps) space.

    Applicable only when ``point`` is a rank-loss candidate (sigma_min
    vanishes there); for a full-rank point the embedding discriminant is
    bounded away from zero and the probe is flagged not applicable.
    """
    x0 = np.asarray(point, dtype=float)
    dirs = _default_embedded_directions() if directions is None else np.asarray(directions, dtype=float)
    if dirs.ndim != 2 or dirs.shape[1] != 3:
        raise DimensionError("directions must be vectors in embedded (x, y, eps) space")
    ts = tuple(float(t) for t in t_values)
    if len(ts) < 2 or any(t <= 0.0 for t in ts):
        raise DomainError("need at least two positive t values")

    a0 = eval_family(fam, x0)
    scale = 1.0 + float(np.linalg.norm(a0))
    sigma_here = svd_point(a0).sigma[-1]
    applicable = bool(sigma_here <= 1e-6 * scale)

    ratios = np.empty((dirs.shape[0], len(ts)))
    for i, v in enumerate(dirs):
        v = v / np.linalg.norm(v)
        for k, t in enumerate(ts):
            sig = svd_point(eval_family(fam, x0 + t * v[:2])).sigma
            ratios[i, k] = embedding_discriminant(sig, t * v[2]) / (t * t)
    stab = np.array([_stabilized(row) for row in ratios])
    if applicable:
        verdict, min_limit = _probe_verdict(ratios, stab)
    else:
        verdict, min_limit = "not_applicable", float(np.min(ratios[:, -1]))
    return ProbeResult(
        kind="embedding_discriminant_rate",
        directions=dirs,
        t_values=ts,
        ratios=ratios,
        stabilized=stab,
        min_limit=min_limit,
        verdict=verdict,
        applicable=applicable,
    )


__all__ = [
    "hermitian_embedding",
    "mixing_coefficients",
    "EmbeddingEig",
    "embedding_eigendecomposition",
    "embedding_discriminant",
    "GenericityResult",
    "genericity_det",
    "ProbeResult",
    "sigma_limit_probe",
    "discr_limit_probe",
    "GENERICITY_TOL",
    "DEFAULT_T_VALUES",
]
