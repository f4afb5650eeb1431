"""Connected-sum data (Lambda1, Lambda2, v): validity, the GL2+ action and area bookkeeping."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction

from .exactnum import QuadNum, exact_sqrt, is_exact
from .lattice import (
    LatticeBasis,
    Mat2,
    Vec,
    act,
    basis_from_json,
    basis_to_json,
    div,
    dot,
    gauss_reduce,
    norm_sq,
    vfloat,
    vscale,
)

SEGMENT_TOL = 1e-9
WARN_TOL = 1e-6


class InvalidSplitting(ValueError):
    """The slit meets a lattice point it should avoid (or misses one it needs)."""

    def __init__(self, message: str, witness=None):
        super().__init__(message)
        self.witness = witness


@dataclass(frozen=True)
class SplittingTriple:
    lambda1: LatticeBasis
    lambda2: LatticeBasis
    v: Vec
    primitive_in: str = "second"

    def __post_init__(self):
        if self.primitive_in not in ("first", "second"):
            raise ValueError("primitive_in must be 'first' or 'second'")

    @property
    def exact(self) -> bool:
        return self.lambda1.exact and self.lambda2.exact and all(is_exact(x) for x in self.v)

    @property
    def slit_lattice(self) -> LatticeBasis:
        """The lattice in which v is primitive."""
        return self.lambda2 if self.primitive_in == "second" else self.lambda1

    @property
    def other_lattice(self) -> LatticeBasis:
        return self.lambda1 if self.primitive_in == "second" else self.lambda2

    def total_area(self):
        return self.lambda1.area + self.lambda2.area

    def to_float(self) -> SplittingTriple:
        return SplittingTriple(self.lambda1.to_float(), self.lambda2.to_float(), vfloat(self.v), self.primitive_in)

    def scaled(self, s) -> SplittingTriple:
        return SplittingTriple(self.lambda1.scaled(s), self.lambda2.scaled(s), vscale(s, self.v), self.primitive_in)

    def to_json(self) -> dict:
        from .lattice import _scalar_json

        return {
            "lambda1": basis_to_json(self.lambda1),
            "lambda2": basis_to_json(self.lambda2),
            "v": [_scalar_json(self.v[0]), _scalar_json(self.v[1])],
            "primitive_in": self.primitive_in,
        }

    @classmethod
    def from_json(cls, data: dict) -> SplittingTriple:
        from .lattice import _scalar_from_json

        return cls(
            basis_from_json(data["lambda1"]),
            basis_from_json(data["lambda2"]),
            tuple(_scalar_from_json(x) for x in data["v"]),
            data.get("primitive_in", "second"),
        )


@dataclass
class SegmentReport:
    points: list = field(default_factory=list)  # lattice points on [0, v], as (s, point)
    near_misses: list = field(default_factory=list)  # (distance, point) within WARN_TOL


@dataclass
class SplittingReport:
    valid: bool
    primitive_in: str | None
    witness: dict
    warnings: list


def segment_lattice_points(L: LatticeBasis, v: Vec, exact: bool | None = None) -> SegmentReport:
    """Lattice points on the closed segment [0, v].

    Exact inputs are solved in lattice coordinates; float inputs scan the disk of radius |v|
    and also report near misses.
    """
    if exact is None:
        exact = L.exact and all(is_exact(x) for x in v)
    report = SegmentReport()
    vv = norm_sq(v)
    if vv == 0:
        raise ValueError("slit vector v must be nonzero")
    if exact:
        # s v lies in L iff s times each coordinate of v is an integer; step through the smaller one
        cs = sorted((c for c in L.coordinates(v) if c != 0), key=lambda c: abs(float(c)))
        lead = cs[0]
        for k in range(math.floor(abs(lead)) + 1):
            sv = div(k, abs(lead))
            if all(sv * c == math.floor(sv * c) for c in cs):
                report.points.append((sv, vscale(sv, v)))
        return report
    L = L.to_float()
    v = vfloat(v)
    vv = norm_sq(v)
    f1, f2, _ = gauss_reduce(L.e1, L.e2)
    vlen = math.sqrt(float(vv))
    # reduced basis: |m f1 + n f2| >= |m| |f1| sqrt(3)/2, and likewise for n
    b1 = int((vlen + WARN_TOL) / math.sqrt(0.75 * float(norm_sq(f1)))) + 1
    b2 = int((vlen + WARN_TOL) / math.sqrt(0.75 * float(norm_sq(f2)))) + 1
    for m in range(-b1, b1 + 1):
        for n in range(-b2, b2 + 1):
            w = (m * f1[0] + n * f2[0], m * f1[1] + n * f2[1])
            s = dot(w, v) / vv
            sc = min(max(s, 0.0), 1.0)
            dist = math.hypot(w[0] - sc * v[0], w[1] - sc * v[1])
            scale = max(1.0, vlen)
            if dist <= SEGMENT_TOL * scale:
                report.points.append((sc, w))
            elif dist < WARN_TOL * scale:
                report.near_misses.append((dist, w))
    report.points.sort(key=lambda sp: float(sp[0]))
    return report


def _only_origin(rep: SegmentReport) -> bool:
    return len(rep.points) == 1


def _origin_and_end(rep: SegmentReport, exact: bool) -> bool:
    if len(rep.points) != 2:
        return False
    s = rep.points[1][0]
    return s == 1 if exact else abs(float(s) - 1.0) <= SEGMENT_TOL


def validate_splitting(t: SplittingTriple) -> SplittingReport:
    """Check [0,v] meets one lattice only at 0 and the other exactly at {0, v}."""
    if t.v[0] == 0 and t.v[1] == 0:
        raise ValueError("slit vector v must be nonzero")
    exact = t.exact
    r1 = segment_lattice_points(t.lambda1, t.v, exact)
    r2 = segment_lattice_points(t.lambda2, t.v, exact)
    witness = {"lambda1": [p for _, p in r1.points], "lambda2": [p for _, p in r2.points]}
    notes = [f"near-degenerate slit: lattice point {p} at distance {d:.3g}" for d, p in r1.near_misses + r2.near_misses]
    primitive_in = None
    if _only_origin(r1) and _origin_and_end(r2, exact):
        primitive_in = "second"
    elif _only_origin(r2) and _origin_and_end(r1, exact):
        primitive_in = "first"
    return SplittingReport(primitive_in is not None, primitive_in, witness, notes)


def checked(t: SplittingTriple) -> SplittingTriple:
    """Validate and return the triple with primitive_in set from the check; raise on failure."""
    rep = validate_splitting(t)
    if not rep.valid:
        raise InvalidSplitting("invalid splitting triple", rep.witness)
    for note in rep.warnings:
        warnings.warn(note, stacklevel=2)
    if rep.primitive_in != t.primitive_in:
        t = SplittingTriple(t.lambda1, t.lambda2, t.v, rep.primitive_in)
    return t


def act_splitting(g: Mat2, t: SplittingTriple) -> SplittingTriple:
    return SplittingTriple(act(g, t.lambda1), act(g, t.lambda2), g @ t.v, t.primitive_in)


def area_ratio(t: SplittingTriple):
    """Area(Lambda1) / Area(Lambda2)."""
    a1, a2 = t.lambda1.area, t.lambda2.area
    if isinstance(a1, int) and isinstance(a2, int):
        return Fraction(a1, a2)
    return a1 / a2


def _root(x, n: int):
    """Exact n-th root (n = 2 or 4) of a rational when it is a rational square/biquadrate, else float."""
    if is_exact(x) and not isinstance(x, QuadNum):
        x = Fraction(x)
        num, den = x.numerator, x.denominator
        rn, rd = round(num ** (1 / n)), round(den ** (1 / n))
        for a in (rn - 1, rn, rn + 1):
            for b in (rd - 1, rd, rd + 1):
                if a >= 0 and b > 0 and a**n == num and b**n == den:
                    return Fraction(a, b)
    return float(x) ** (1 / n)


def deform_area(t: SplittingTriple, eps) -> SplittingTriple:
    """Rescale the two tori so that the area ratio is multiplied by exactly (1 + eps).

    Lambda1 is scaled by (1+eps)^(1/4) and Lambda2 by (1+eps)^(-1/4); v follows
    the lattice it is primitive in.
    """
    if not -1 < eps < 1:
        raise ValueError("deform_area needs |eps| < 1")
    if eps == 0:
        return t
    s = _root(1 + eps, 4)
    s1, s2 = s, 1 / s
    sv = s2 if t.primitive_in == "second" else s1
    out = SplittingTriple(t.lambda1.scaled(s1), t.lambda2.scaled(s2), vscale(sv, t.v), t.primitive_in)
    rep = validate_splitting(out)
    if not rep.valid:
        raise InvalidSplitting("deformed slit meets a lattice point", rep.witness)
    return out


def normalize_area(t: SplittingTriple) -> SplittingTriple:
    """Uniform scaling to total area 1."""
    total = t.total_area()
    if total == 1:
        return t
    s = exact_sqrt(total)
    if isinstance(s, QuadNum):
        if s.is_rational:
            return t.scaled(1 / s.a)
        if all(not isinstance(x, QuadNum) or x.k in (1, s.k) for L in (t.lambda1, t.lambda2) for x in (*L.e1, *L.e2)) and all(
            not isinstance(x, QuadNum) or x.k in (1, s.k) for x in t.v
        ):
            return t.scaled(1 / s)
        s = float(s)
    return t.to_float().scaled(1 / s)
