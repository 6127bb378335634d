"""Dense complex matrix primitives for small problems.

Everything in this module is a pure function of its inputs; there is no
cached or shared mutable state, so all operations are safe to call from
concurrent workers.

The singular value decomposition is computed by a one-sided Jacobi
iteration with complex plane rotations.  That choice keeps the factors
deterministic down to the phase convention (see :func:`svd_point`),
which the continuation layer depends on: a loop that returns to its
starting parameter must reproduce the starting factorization bit for
bit, so that any leftover rotation of the singular vectors is genuine
holonomy and not solver noise.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DomainError

# Dense Jacobi sweeps cost O(n^3) each; the loop problems this package
# targets are tiny, so sizes past this cap are refused outright.
MAX_SIZE = 64

_MAX_SWEEPS = 60

# Per-pair relative convergence threshold for the Jacobi sweep.  Chosen a
# few ULPs above the rounding floor of the column updates so the sweep
# terminates instead of churning on noise.
_PAIR_TOL = 4e-15


def as_square_matrix(a) -> np.ndarray:
    """Validate and convert ``a`` to a square complex128 array."""
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {m.shape}")
    n = m.shape[0]
    if n < 1:
        raise DimensionError("matrix must have at least one row")
    if n > MAX_SIZE:
        raise DimensionError(f"matrix size {n} exceeds the supported cap {MAX_SIZE}")
    if not np.all(np.isfinite(m)):
        raise DomainError("matrix entries must be finite")
    return m


@dataclass(frozen=True)
class SVDTriple:
    """A factorization A = U diag(sigma) V*.

    ``u`` and ``v`` are unitary with columns ordered by descending
    ``sigma``.  Instances produced by :func:`svd_point` additionally
    carry the deterministic phase convention described there.
    """

    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray

    @property
    def n(self) -> int:
        return self.u.shape[0]

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.sigma) @ self.v.conj().T

    def reconstruction_error(self, a) -> float:
        return float(np.linalg.norm(self.reconstruct() - np.asarray(a, dtype=np.complex128)))

    def with_column_phases(self, factors: np.ndarray) -> "SVDTriple":
        """Apply one unimodular factor per column to both u and v jointly."""
        f = np.asarray(factors, dtype=np.complex128)
        return SVDTriple(self.u * f[None, :], self.sigma.copy(), self.v * f[None, :])


@dataclass(frozen=True)
class HermEig:
    """Eigendecomposition H = Q diag(lam) Q* of a Hermitian matrix, lam descending."""

    q: np.ndarray
    lam: np.ndarray


def _fix_column_phase(m: np.ndarray, j: int) -> complex:
    """Return the unimodular factor that makes column j's largest entry real positive."""
    col = m[:, j]
    i = int(np.argmax(np.abs(col)))
    z = col[i]
    r = abs(z)
    if r == 0.0:
        return 1.0 + 0.0j
    return np.conj(z) / r


def svd_point(a) -> SVDTriple:
    """Singular value decomposition with a deterministic phase convention.

    One-sided Jacobi on the columns of ``a``: complex plane rotations are
    applied on the right until all column pairs are numerically
    orthogonal, which yields A V = U diag(sigma) with high relative
    accuracy even for tiny singular values.  Columns are then sorted by
    descending sigma and each (u_j, v_j) pair is rotated by a common
    phase so that the largest-magnitude entry of v_j is real positive.
    Exact zero singular values are allowed; the corresponding left
    vectors are completed to an orthonormal basis deterministically.
    """
    a = as_square_matrix(a)
    n = a.shape[0]
    work = np.array(a, dtype=np.complex128)
    v = np.eye(n, dtype=np.complex128)
    scale = float(np.linalg.norm(work))
    if scale > 0.0:
        for _ in range(_MAX_SWEEPS):
            rotated = False
            for p in range(n - 1):
                for q in range(p + 1, n):
                    wp = work[:, p]
                    wq = work[:, q]
                    app = float(np.real(np.vdot(wp, wp)))
                    aqq = float(np.real(np.vdot(wq, wq)))
                    apq = complex(np.vdot(wp, wq))
                    m = abs(apq)
                    if m <= _PAIR_TOL * np.sqrt(app * aqq) or m == 0.0:
                        continue
                    # Unitary 2x2 rotation J with J* G J diagonal, where
                    # G = [[app, apq], [conj(apq), aqq]].  The small-angle
                    # root keeps |theta| <= pi/4, which is what makes the
                    # cyclic sweep converge.
                    tau = (aqq - app) / (2.0 * m)
                    sgn = 1.0 if tau >= 0.0 else -1.0
                    t = -sgn / (abs(tau) + np.hypot(1.0, tau))
                    c = 1.0 / np.sqrt(1.0 + t * t)
                    s = t * c
                    ph = apq / m
                    new_p = c * wp + (s * np.conj(ph)) * wq
                    new_q = (-s * ph) * wp + c * wq
                    work[:, p] = new_p
                    work[:, q] = new_q
                    vp = v[:, p].copy()
                    vq = v[:, q].copy()
                    v[:, p] = c * vp + (s * np.conj(ph)) * vq
                    v[:, q] = (-s * ph) * vp + c * vq
                    rotated = True
            if not rotated:
                break

    sigma = np.sqrt(np.sum(np.abs(work) ** 2, axis=0))
    order = np.argsort(-sigma, kind="stable")
    sigma = sigma[order]
    work = work[:, order]
    v = v[:, order]

    u = np.zeros((n, n), dtype=np.complex128)
    null_floor = scale * n * 1e-15
    live = sigma > null_floor
    for j in range(n):
        if live[j]:
            u[:, j] = work[:, j] / sigma[j]
    # Complete left vectors for (numerically) zero singular values by
    # orthogonalizing canonical basis vectors against the live columns.
    for j in range(n):
        if live[j]:
            continue
        for k in range(n):
            cand = np.zeros(n, dtype=np.complex128)
            cand[k] = 1.0
            for l in range(n):
                if l == j or (not live[l] and l > j):
                    continue
                cand -= np.vdot(u[:, l], cand) * u[:, l]
            nrm = float(np.linalg.norm(cand))
            if nrm > 0.5:
                u[:, j] = cand / nrm
                live[j] = True
                break

    for j in range(n):
        f = _fix_column_phase(v, j)
        v[:, j] *= f
        if sigma[j] > null_floor:
            u[:, j] *= f
        else:
            u[:, j] *= _fix_column_phase(u, j)

    sigma = np.ascontiguousarray(sigma, dtype=np.float64)
    return SVDTriple(u, sigma, v)


def herm_eig(h) -> HermEig:
    """Eigendecomposition of a Hermitian matrix, eigenvalues descending.

    The input must be Hermitian within 1e-12 of its Frobenius norm; it is
    symmetrized before the solve.  Eigenvector columns get the same
    largest-entry-real-positive phase convention as :func:`svd_point`.
    """
    h = as_square_matrix(h)
    hnorm = float(np.linalg.norm(h))
    skew = float(np.linalg.norm(h - h.conj().T))
    if skew > 1e-12 * max(hnorm, 1.0):
        raise DomainError(f"matrix is not Hermitian: |H - H*| = {skew:.3e}")
    hs = 0.5 * (h + h.conj().T)
    lam, q = np.linalg.eigh(hs)
    lam = lam[::-1].copy()
    q = np.ascontiguousarray(q[:, ::-1])
    for j in range(q.shape[1]):
        q[:, j] *= _fix_column_phase(q, j)
    return HermEig(q=q, lam=lam)


def det(a) -> complex:
    """Determinant by LU factorization with partial pivoting."""
    a = as_square_matrix(a)
    n = a.shape[0]
    lu = np.array(a, dtype=np.complex128)
    sign = 1.0 + 0.0j
    for k in range(n - 1):
        piv = k + int(np.argmax(np.abs(lu[k:, k])))
        if lu[piv, k] == 0.0:
            continue
        if piv != k:
            lu[[k, piv], :] = lu[[piv, k], :]
            sign = -sign
        factors = lu[k + 1 :, k] / lu[k, k]
        lu[k + 1 :, k:] -= np.outer(factors, lu[k, k:])
    return complex(sign * np.prod(np.diag(lu)))


def discriminant(lam) -> float:
    """Product of squared pairwise differences of a real sequence."""
    lam = np.asarray(lam, dtype=np.float64)
    if lam.ndim != 1 or lam.size < 1:
        raise DimensionError("expected a non-empty 1-D real sequence")
    if not np.all(np.isfinite(lam)):
        raise DomainError("values must be finite")
    out = 1.0
    for i in range(lam.size):
        for j in range(i + 1, lam.size):
            d = lam[j] - lam[i]
            out *= d * d
    return float(out)
