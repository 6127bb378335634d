"""Shared fixtures: demo families, a known non-generic family, and a
factory for families with one planted rank-loss point."""
import math
from pathlib import Path

import numpy as np
import pytest

from svdloop.model import MatrixFamily, make_family, parse_family

DEMO_DIR = Path(__file__).resolve().parent.parent / "demo"


@pytest.fixture(scope="session")
def triangular_family() -> MatrixFamily:
    """[[1, 1], [0, x - iy]]: full rank except a generic zero at the origin."""
    return parse_family((DEMO_DIR / "family_triangular.json").read_text())


@pytest.fixture(scope="session")
def affine4_family() -> MatrixFamily:
    return parse_family((DEMO_DIR / "family_affine4.json").read_text())


@pytest.fixture(scope="session")
def squared_family() -> MatrixFamily:
    """diag((x - iy)^2, 1): the origin is a rank-loss point but NOT generic."""
    z = np.zeros((2, 2), dtype=complex)
    c00 = z.copy(); c00[1, 1] = 1.0
    c20 = z.copy(); c20[0, 0] = 1.0
    c02 = z.copy(); c02[0, 0] = -1.0
    c11 = z.copy(); c11[0, 0] = -2.0j
    return make_family(2, [(0, 0, c00), (2, 0, c20), (0, 2, c02), (1, 1, c11)])


def beta1_closed_form(r: float) -> float:
    """First-column accrued phase around the circle of radius r for the
    triangular demo family, derived by solving the transport equations
    in closed form."""
    r2 = r * r
    return math.pi * r2 / ((0.5 * (math.sqrt(r2 * r2 + 4.0) - r2) + 1.0) ** 2 + r2)


@pytest.fixture(scope="session")
def beta1_formula():
    return beta1_closed_form


def random_unitary(rng: np.random.Generator, n: int) -> np.ndarray:
    z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def plant_rank_loss(rng: np.random.Generator, n: int, root) -> MatrixFamily:
    """Family B diag((x-a) - i(y-b), d_2, ..., d_n) C with unitary B, C.

    The d_j are distinct values in [1.5, 3], so the family has exactly one
    rank-loss point in the whole plane, at (a, b), and it is generic; the
    singular values away from it are {|(x-a) - i(y-b)|, d_2, ..., d_n}.
    """
    if n < 2:
        raise ValueError("need n >= 2")
    a, b = float(root[0]), float(root[1])
    # distinct fillers, >= 1.5 and pairwise separated, so loops with
    # |(x,y) - root| <= 1.3 keep a healthy singular value gap
    fillers = np.linspace(1.5, 3.0, n - 1) + rng.uniform(0.0, 0.1, size=n - 1)
    bu = random_unitary(rng, n)
    cu = random_unitary(rng, n)
    e11 = np.zeros((n, n), dtype=complex)
    e11[0, 0] = 1.0
    d0 = np.diag(np.concatenate([[complex(-a, b)], fillers.astype(complex)]))
    return make_family(
        n,
        [
            (0, 0, bu @ d0 @ cu),
            (1, 0, bu @ e11 @ cu),
            (0, 1, -1j * (bu @ e11 @ cu)),
        ],
    )


@pytest.fixture(scope="session")
def manufactured():
    return plant_rank_loss


@pytest.fixture(scope="session")
def haar_unitary():
    return random_unitary
