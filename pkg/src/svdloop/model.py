"""Matrix families over two real parameters, loops, and surface scans.

A family is a finite sum  A(x, y) = sum_t x^jx * y^ky * M_t  of constant
complex coefficient matrices.  Families and loops are read from small
JSON documents; see ``parse_family`` and ``parse_loop`` for the schemas.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DimensionError, DomainError, ParseError
from .linalg import SVDTriple, as_square_matrix, det, svd_point

MIN_LOOP_SAMPLES = 8


@dataclass(frozen=True)
class FamilyTerm:
    jx: int
    ky: int
    matrix: np.ndarray


@dataclass(frozen=True)
class MatrixFamily:
    """Polynomial matrix family of two real parameters."""

    n: int
    terms: tuple[FamilyTerm, ...]

    @property
    def degree(self) -> int:
        return max((t.jx + t.ky for t in self.terms), default=0)


def make_family(n: int, terms) -> MatrixFamily:
    if not isinstance(n, int) or n < 1:
        raise DomainError(f"family size must be a positive integer, got {n!r}")
    seen: set[tuple[int, int]] = set()
    checked: list[FamilyTerm] = []
    for idx, (jx, ky, mat) in enumerate(terms):
        if not (isinstance(jx, int) and isinstance(ky, int)) or jx < 0 or ky < 0:
            raise DomainError(f"terms[{idx}]: exponents must be non-negative integers")
        if (jx, ky) in seen:
            raise DomainError(f"terms[{idx}]: duplicate exponent pair ({jx}, {ky})")
        seen.add((jx, ky))
        m = as_square_matrix(mat)
        if m.shape[0] != n:
            raise DimensionError(f"terms[{idx}]: matrix is {m.shape[0]}x{m.shape[0]}, family says n={n}")
        m.setflags(write=False)
        checked.append(FamilyTerm(jx, ky, m))
    if not checked:
        raise DomainError("family must have at least one term")
    return MatrixFamily(n=n, terms=tuple(checked))


def _entry_pairs_to_matrix(rows, where: str) -> np.ndarray:
    out = []
    if not isinstance(rows, list) or not rows:
        raise ParseError(f"{where}: expected a non-empty list of rows")
    for i, row in enumerate(rows):
        if not isinstance(row, list):
            raise ParseError(f"{where} row {i}: expected a list")
        vals = []
        for j, entry in enumerate(row):
            if (
                not isinstance(entry, list)
                or len(entry) != 2
                or not all(isinstance(x, (int, float)) for x in entry)
            ):
                raise ParseError(f"{where} row {i} col {j}: entries are [re, im] pairs")
            vals.append(complex(float(entry[0]), float(entry[1])))
        out.append(vals)
    return np.array(out, dtype=np.complex128)


def _matrix_to_entry_pairs(m: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def family_from_dict(doc: dict) -> MatrixFamily:
    if not isinstance(doc, dict):
        raise ParseError("family document must be a JSON object")
    if "n" not in doc or "terms" not in doc:
        raise ParseError("family document needs keys 'n' and 'terms'")
    n = doc["n"]
    if not isinstance(n, int):
        raise ParseError("family field 'n' must be an integer")
    if not isinstance(doc["terms"], list):
        raise ParseError("family field 'terms' must be a list")
    terms = []
    for idx, t in enumerate(doc["terms"]):
        where = f"terms[{idx}]"
        if not isinstance(t, dict):
            raise ParseError(f"{where}: expected an object")
        for key in ("jx", "ky", "matrix"):
            if key not in t:
                raise ParseError(f"{where}: missing key '{key}'")
        if not isinstance(t["jx"], int) or not isinstance(t["ky"], int):
            raise ParseError(f"{where}: 'jx' and 'ky' must be integers")
        mat = _entry_pairs_to_matrix(t["matrix"], f"{where}.matrix")
        terms.append((t["jx"], t["ky"], mat))
    try:
        return make_family(n, terms)
    except (DomainError, DimensionError) as exc:
        raise ParseError(str(exc)) from exc


def parse_family(text: str) -> MatrixFamily:
    """Parse a family document.

    Schema::

        {"n": 2,
         "terms": [{"jx": 0, "ky": 0, "matrix": [[[re, im], ...], ...]}, ...]}
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return family_from_dict(doc)


def family_to_dict(fam: MatrixFamily) -> dict:
    return {
        "n": fam.n,
        "terms": [
            {"jx": t.jx, "ky": t.ky, "matrix": _matrix_to_entry_pairs(t.matrix)}
            for t in fam.terms
        ],
    }


def serialize_family(fam: MatrixFamily) -> str:
    """Inverse of parse_family; coefficient values round-trip bit exactly."""
    return json.dumps(family_to_dict(fam), indent=2)


def eval_family(fam: MatrixFamily, xy) -> np.ndarray:
    x, y = float(xy[0]), float(xy[1])
    out = np.zeros((fam.n, fam.n), dtype=np.complex128)
    for t in fam.terms:
        out += (x**t.jx) * (y**t.ky) * t.matrix
    return out


def eval_derivative(fam: MatrixFamily, xy, direction) -> np.ndarray:
    """Directional derivative of the family at ``xy`` along ``direction``.

    Linear in ``direction``; callers probing unit-rate slopes should pass
    a unit vector.
    """
    x, y = float(xy[0]), float(xy[1])
    dx, dy = float(direction[0]), float(direction[1])
    out = np.zeros((fam.n, fam.n), dtype=np.complex128)
    for t in fam.terms:
        coef = 0.0
        if t.jx > 0:
            coef += t.jx * x ** (t.jx - 1) * y**t.ky * dx
        if t.ky > 0:
            coef += t.ky * x**t.jx * y ** (t.ky - 1) * dy
        if coef != 0.0:
            out += coef * t.matrix
    return out


@dataclass(frozen=True)
class Rect:
    """Axis-aligned closed rectangle [xmin, xmax] x [ymin, ymax]."""

    xmin: float
    xmax: float
    ymin: float
    ymax: float

    def __post_init__(self):
        for v in (self.xmin, self.xmax, self.ymin, self.ymax):
            if not math.isfinite(v):
                raise DomainError("rectangle bounds must be finite")
        if not (self.xmax > self.xmin and self.ymax > self.ymin):
            raise DomainError("rectangle must have positive width and height")

    @property
    def width(self) -> float:
        return self.xmax - self.xmin

    @property
    def height(self) -> float:
        return self.ymax - self.ymin

    @property
    def center(self) -> tuple[float, float]:
        return (0.5 * (self.xmin + self.xmax), 0.5 * (self.ymin + self.ymax))

    @property
    def diameter(self) -> float:
        return math.hypot(self.width, self.height)

    def contains(self, xy, pad: float = 0.0) -> bool:
        x, y = xy
        return (
            self.xmin - pad <= x <= self.xmax + pad
            and self.ymin - pad <= y <= self.ymax + pad
        )

    def inflated(self, factor: float) -> "Rect":
        cx, cy = self.center
        hw = 0.5 * self.width * factor
        hh = 0.5 * self.height * factor
        return Rect(cx - hw, cx + hw, cy - hh, cy + hh)

    def split4(self) -> tuple["Rect", "Rect", "Rect", "Rect"]:
        cx, cy = self.center
        return (
            Rect(self.xmin, cx, self.ymin, cy),
            Rect(cx, self.xmax, self.ymin, cy),
            Rect(self.xmin, cx, cy, self.ymax),
            Rect(cx, self.xmax, cy, self.ymax),
        )

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.xmin, self.xmax, self.ymin, self.ymax)


@dataclass(frozen=True)
class PathLoop:
    """Closed loop in parameter space: a circle or a rectangle boundary.

    ``samples`` is the requested baseline sample count; the continuation
    stepper treats 1/samples as its largest allowed parameter step.
    """

    kind: str
    samples: int
    center: tuple[float, float] = (0.0, 0.0)
    radius: float = 0.0
    rect: Rect | None = None

    def __post_init__(self):
        if self.kind not in ("circle", "rect"):
            raise DomainError(f"unknown loop kind {self.kind!r}")
        if not isinstance(self.samples, int) or self.samples < MIN_LOOP_SAMPLES:
            raise DomainError(f"loop samples must be an integer >= {MIN_LOOP_SAMPLES}")
        if self.kind == "circle":
            if not (math.isfinite(self.radius) and self.radius > 0.0):
                raise DomainError("circle radius must be positive and finite")
            if not all(math.isfinite(c) for c in self.center):
                raise DomainError("circle center must be finite")
        if self.kind == "rect" and self.rect is None:
            raise DomainError("rect loop needs a rectangle")


def circle_loop(center, radius: float, samples: int) -> PathLoop:
    return PathLoop(kind="circle", samples=samples, center=(float(center[0]), float(center[1])), radius=float(radius))


def rect_loop(rect: Rect, samples: int) -> PathLoop:
    return PathLoop(kind="rect", samples=samples, rect=rect)


def with_samples(loop: PathLoop, samples: int) -> PathLoop:
    return replace(loop, samples=samples)


def loop_point(loop: PathLoop, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Point and velocity of the loop at parameter t in [0, 1].

    The parameter is taken modulo 1 so that t = 0 and t = 1 give the
    same point (and the same outgoing velocity) exactly.  Rectangle
    corners belong to the outgoing edge.
    """
    t = float(t)
    if not (0.0 <= t <= 1.0):
        raise DomainError(f"loop parameter must lie in [0, 1], got {t}")
    u = t - math.floor(t)  # maps 1.0 to 0.0 exactly
    if loop.kind == "circle":
        ang = 2.0 * math.pi * u
        r = loop.radius
        cx, cy = loop.center
        point = np.array([cx + r * math.cos(ang), cy + r * math.sin(ang)])
        vel = np.array([-2.0 * math.pi * r * math.sin(ang), 2.0 * math.pi * r * math.cos(ang)])
        return point, vel
    rect = loop.rect
    w, h = rect.width, rect.height
    per = 2.0 * (w + h)
    s = u * per
    if s < w:
        point = np.array([rect.xmin + s, rect.ymin])
        direction = np.array([1.0, 0.0])
    elif s < w + h:
        point = np.array([rect.xmax, rect.ymin + (s - w)])
        direction = np.array([0.0, 1.0])
    elif s < 2.0 * w + h:
        point = np.array([rect.xmax - (s - w - h), rect.ymax])
        direction = np.array([-1.0, 0.0])
    else:
        point = np.array([rect.xmin, rect.ymax - (s - 2.0 * w - h)])
        direction = np.array([0.0, -1.0])
    return point, direction * per


def loop_from_dict(doc: dict) -> PathLoop:
    if not isinstance(doc, dict):
        raise ParseError("loop document must be a JSON object")
    kind = doc.get("kind")
    if kind not in ("circle", "rect"):
        raise ParseError(f"loop field 'kind' must be 'circle' or 'rect', got {kind!r}")
    samples = doc.get("samples")
    if not isinstance(samples, int):
        raise ParseError("loop field 'samples' must be an integer")
    try:
        if kind == "circle":
            center = doc.get("center")
            if not (isinstance(center, list) and len(center) == 2):
                raise ParseError("circle loop needs 'center': [x, y]")
            if not isinstance(doc.get("radius"), (int, float)):
                raise ParseError("circle loop needs a numeric 'radius'")
            return circle_loop(center, float(doc["radius"]), samples)
        box = doc.get("box")
        if not (isinstance(box, list) and len(box) == 4):
            raise ParseError("rect loop needs 'box': [xmin, xmax, ymin, ymax]")
        return rect_loop(Rect(*[float(b) for b in box]), samples)
    except DomainError as exc:
        raise ParseError(str(exc)) from exc


def parse_loop(text: str) -> PathLoop:
    """Parse a loop document.

    Schemas::

        {"kind": "circle", "center": [x, y], "radius": r, "samples": N}
        {"kind": "rect", "box": [xmin, xmax, ymin, ymax], "samples": N}
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return loop_from_dict(doc)


def loop_to_dict(loop: PathLoop) -> dict:
    if loop.kind == "circle":
        return {
            "kind": "circle",
            "center": [loop.center[0], loop.center[1]],
            "radius": loop.radius,
            "samples": loop.samples,
        }
    return {"kind": "rect", "box": list(loop.rect.as_tuple()), "samples": loop.samples}


def serialize_loop(loop: PathLoop) -> str:
    return json.dumps(loop_to_dict(loop), indent=2)


@dataclass(frozen=True)
class SigmaSurface:
    """Gridded surface of spectral diagnostics over a rectangle."""

    xs: np.ndarray
    ys: np.ndarray
    sigma_min: np.ndarray  # shape (len(ys), len(xs))
    gap: np.ndarray
    absdet: np.ndarray
    box: Rect = field(repr=False)

    def argmin_sigma(self) -> tuple[float, float, float]:
        iy, ix = np.unravel_index(int(np.argmin(self.sigma_min)), self.sigma_min.shape)
        return (float(self.xs[ix]), float(self.ys[iy]), float(self.sigma_min[iy, ix]))

    def min_gap(self) -> float:
        return float(np.min(self.gap))

    def to_csv(self) -> str:
        lines = ["x,y,sigma_min,gap,absdet"]
        for iy, y in enumerate(self.ys):
            for ix, x in enumerate(self.xs):
                lines.append(
                    f"{float(x)!r},{float(y)!r},{float(self.sigma_min[iy, ix])!r},"
                    f"{float(self.gap[iy, ix])!r},{float(self.absdet[iy, ix])!r}"
                )
        return "\n".join(lines) + "\n"


def spectral_gap(sigma: np.ndarray) -> float:
    """Smallest spacing between consecutive singular values (inf for n = 1)."""
    if sigma.size < 2:
        return math.inf
    return float(np.min(sigma[:-1] - sigma[1:]))


def grid_scan(fam: MatrixFamily, box: Rect, nx: int, ny: int | None = None) -> SigmaSurface:
    """Evaluate sigma_min, the spectral gap, and |det| on a regular grid."""
    if ny is None:
        ny = nx
    if nx < 2 or ny < 2:
        raise DomainError("grid resolution must be at least 2 per axis")
    xs = np.linspace(box.xmin, box.xmax, nx)
    ys = np.linspace(box.ymin, box.ymax, ny)
    smin = np.empty((ny, nx))
    gap = np.empty((ny, nx))
    absdet = np.empty((ny, nx))
    for iy, y in enumerate(ys):
        for ix, x in enumerate(xs):
            a = eval_family(fam, (x, y))
            triple = svd_point(a)
            smin[iy, ix] = triple.sigma[-1]
            gap[iy, ix] = spectral_gap(triple.sigma)
            absdet[iy, ix] = abs(det(a))
    return SigmaSurface(xs=xs, ys=ys, sigma_min=smin, gap=gap, absdet=absdet, box=box)


__all__ = [
    "FamilyTerm",
    "MatrixFamily",
    "make_family",
    "parse_family",
    "family_from_dict",
    "family_to_dict",
    "serialize_family",
    "eval_family",
    "eval_derivative",
    "Rect",
    "PathLoop",
    "circle_loop",
    "rect_loop",
    "with_samples",
    "loop_point",
    "parse_loop",
    "loop_from_dict",
    "loop_to_dict",
    "serialize_loop",
    "SigmaSurface",
    "spectral_gap",
    "grid_scan",
    "SVDTriple",
]
