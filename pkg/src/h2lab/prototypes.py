"""Prototype data for Weierstrass curves, L-shaped tables and the index formulas."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .exactnum import QuadNum, squarefree_part
from .lattice import LatticeBasis, LatticePair
from .splitting import InvalidSplitting, SplittingTriple, validate_splitting


def _check_discriminant(D: int) -> None:
    if not isinstance(D, int) or D <= 0:
        raise ValueError(f"discriminant must be a positive integer, got {D!r}")
    if D % 4 not in (0, 1):
        raise ValueError(f"discriminant {D} is not 0 or 1 mod 4")


def _lambda(e: int, D: int) -> QuadNum:
    return (QuadNum.sqrt(D) + e) / 2


def _e_range(D: int):
    """Integers e with e^2 < D and e = D mod 2, in increasing order."""
    top = math.isqrt(D - 1)
    for e in range(-top, top + 1):
        if (e - D) % 2 == 0:
            yield e


@dataclass(frozen=True, order=True)
class EigenformPrototype:
    e: int
    ell: int
    m: int

    def __post_init__(self):
        if self.ell <= 0 or self.m <= 0:
            raise ValueError("ell and m must be positive")
        if math.gcd(self.e, self.ell) != 1:
            raise ValueError("gcd(e, ell) must be 1")

    @property
    def D(self) -> int:
        return self.e * self.e + 4 * self.ell * self.ell * self.m

    @property
    def lam(self) -> QuadNum:
        return _lambda(self.e, self.D)


@dataclass(frozen=True, order=True)
class SplitPrototype:
    a: int
    b: int
    c: int
    e: int

    def __post_init__(self):
        bad = _split_violation(self.a, self.b, self.c, self.e)
        if bad:
            raise ValueError(f"not a splitting prototype: {bad}")

    @property
    def D(self) -> int:
        return self.e * self.e + 4 * self.b * self.c

    @property
    def lam(self) -> QuadNum:
        return _lambda(self.e, self.D)


def _split_violation(a: int, b: int, c: int, e: int) -> str | None:
    if b <= 0 or c <= 0:
        return "b and c must be positive"
    if not 0 <= a < math.gcd(b, c):
        return "need 0 <= a < gcd(b, c)"
    if not c + e < b:
        return "need c + e < b"
    if math.gcd(math.gcd(a, b), math.gcd(c, e)) != 1:
        return "need gcd(a, b, c, e) = 1"
    return None


def enumerate_eigenform_prototypes(D: int) -> list[EigenformPrototype]:
    """All (e, ell, m) with D = e^2 + 4 ell^2 m and gcd(e, ell) = 1, sorted."""
    _check_discriminant(D)
    out = []
    for e in _e_range(D):
        n = (D - e * e) // 4
        ell = 1
        while ell * ell <= n:
            if n % (ell * ell) == 0 and math.gcd(e, ell) == 1:
                out.append(EigenformPrototype(e, ell, n // (ell * ell)))
            ell += 1
    return sorted(out)


def enumerate_split_prototypes(D: int) -> list[SplitPrototype]:
    """All (a, b, c, e) with D = e^2 + 4bc satisfying the prototype inequalities, sorted."""
    _check_discriminant(D)
    out = []
    for e in _e_range(D):
        n = (D - e * e) // 4
        for b in range(1, n + 1):
            if n % b:
                continue
            c = n // b
            if c + e >= b:
                continue
            for a in range(math.gcd(b, c)):
                if _split_violation(a, b, c, e) is None:
                    out.append(SplitPrototype(a, b, c, e))
    return sorted(out)


def prototypical_pair(p: EigenformPrototype) -> LatticePair:
    """Lambda1 = Z(ell m, 0) + Z(0, ell), Lambda2 = Z(lam, 0) + Z(0, lam); areas ell^2 m and lam^2."""
    lam = p.lam
    zero = QuadNum(0, 0, lam.k)
    L1 = LatticeBasis((p.ell * p.m, 0), (0, p.ell))
    L2 = LatticeBasis((lam, zero), (zero, lam))
    return LatticePair(L1, L2)


def prototypical_splitting(p: SplitPrototype) -> SplittingTriple:
    """Lambda1 = Z(b, 0) + Z(a, c), Lambda2 = lam Z^2, slit v = (lam, 0) primitive in Lambda2."""
    lam = p.lam
    zero = QuadNum(0, 0, lam.k)
    t = SplittingTriple(
        LatticeBasis((p.b, 0), (p.a, p.c)),
        LatticeBasis((lam, zero), (zero, lam)),
        (lam, zero),
        "second",
    )
    rep = validate_splitting(t)
    if not rep.valid or rep.primitive_in != "second":
        raise InvalidSplitting(f"prototype {p} produced an invalid triple", rep.witness)
    return t


def lshape_splitting(D: int) -> SplittingTriple:
    """Triple of the L-shaped table P(1 + d/2, d/2) for D = d^2 with d even."""
    if not isinstance(D, int) or D <= 4:
        raise ValueError("D must be an even square larger than 4")
    d = math.isqrt(D)
    if d * d != D or d % 2:
        raise ValueError(f"D = {D} is not the square of an even integer")
    h = d // 2
    t = SplittingTriple(LatticeBasis((h, 0), (0, 1)), LatticeBasis((1, 0), (0, h)), (1, 0), "second")
    if not validate_splitting(t).valid:
        raise InvalidSplitting(f"L-shape triple for D = {D} is invalid")
    return t


def _prime_factors(n: int) -> list[int]:
    out, p = [], 2
    while p * p <= n:
        if n % p == 0:
            out.append(p)
            while n % p == 0:
                n //= p
        p += 1
    if n > 1:
        out.append(n)
    return out


def gamma0_index(n: int) -> int:
    """[SL2(Z) : Gamma0(n)] = n prod_{p | n} (1 + 1/p)."""
    if not isinstance(n, int) or n < 1:
        raise ValueError("n must be a positive integer")
    idx = Fraction(n)
    for p in _prime_factors(n):
        idx *= Fraction(p + 1, p)
    return int(idx)


def veech_index(d: int) -> Fraction:
    """(3/8)(d - 2) d^2 prod_{p | d} (1 - 1/p^2), evaluated exactly."""
    if not isinstance(d, int) or d <= 2:
        raise ValueError("veech_index needs d >= 3")
    val = Fraction(3, 8) * (d - 2) * d * d
    for p in _prime_factors(d):
        val *= 1 - Fraction(1, p * p)
    return val


@dataclass(frozen=True)
class RatioApproximation:
    prototype: SplitPrototype
    ratio: QuadNum  # (sqrt D + e) / (sqrt D - e)
    area_ratio: QuadNum  # Area(Lambda1) / Area(Lambda2) of the prototypical splitting
    deviation: float  # |ratio - lambda_target|


def approx_ratio_prototype(lambda_target, b: int) -> RatioApproximation:
    """Prototype (0, b, 1, e) with e = floor((lam - 1) lam^(-1/2) b^(1/2)).

    Its ratio (sqrt D + e)/(sqrt D - e) tends to lam_target at rate b^(-1/2);
    the area ratio of the prototypical splitting is the reciprocal of that ratio.
    """
    if not lambda_target > 0:
        raise ValueError("target ratio must be positive")
    if not isinstance(b, int) or b < 1:
        raise ValueError("b must be a positive integer")
    e = _floor_formula(lambda_target, b)
    if not 1 + e < b:
        raise ValueError(f"c + e < b fails for b = {b} (e = {e}); use a larger b")
    proto = SplitPrototype(0, b, 1, e)
    root = QuadNum.sqrt(proto.D)
    ratio = (root + e) / (root - e)
    return RatioApproximation(proto, ratio, 1 / ratio, abs(float(ratio) - float(lambda_target)))


def _floor_formula(lam, b: int) -> int:
    """floor((lam - 1) sqrt(b / lam)), exact for rational lam."""
    if isinstance(lam, float):
        lam = Fraction(lam)
    lam = Fraction(lam)
    if lam == 1:
        return 0
    # x = (lam - 1)^2 b / lam; e = sign(lam - 1) * sqrt(x), floored
    x = (lam - 1) ** 2 * b / lam
    r = math.isqrt(x.numerator // x.denominator)
    while (r + 1) ** 2 <= x:
        r += 1
    if lam > 1:
        return r
    # negative branch: floor(-sqrt x) = -ceil(sqrt x)
    return -r if r * r == x else -(r + 1)


@dataclass(frozen=True)
class AreaAdjustment:
    p: int
    q: int
    epsilon: QuadNum  # (p/q) sqrt k - 1, exact


def rational_area_adjust(k: int, eta0) -> AreaAdjustment:
    """Smallest q (then p) with (p/q) sqrt k in [1, 1 + eta0)."""
    if squarefree_part(k)[0] != k:
        raise ValueError(f"k = {k} is not square-free")
    if not 0 < eta0 < 1:
        raise ValueError("eta0 must lie in (0, 1)")
    top = (1 + Fraction(eta0)) ** 2
    q = 1
    while True:
        # least p with p^2 k >= q^2
        p = math.isqrt(q * q // k)
        while p * p * k < q * q:
            p += 1
        if p * p * k < top * q * q:
            eps = QuadNum(0, Fraction(p, q), k) - 1 if k > 1 else QuadNum(Fraction(p, q) - 1)
            return AreaAdjustment(p, q, eps)
        q += 1


@dataclass(frozen=True)
class DiscriminantCandidate:
    e: int | None
    ell: int
    D: int | None
    admissible: bool
    reason: str


@dataclass(frozen=True)
class DiscriminantReport:
    branch: str  # "D=m/4" or "square"
    k_divides_m: bool
    candidates: tuple
    admissible: tuple


def discriminant_constraints(p: int, q: int, k: int, m: int) -> DiscriminantReport:
    """Prototype data compatible with sqrt(Area1/Area2) = (p/q) sqrt k.

    The unit ratio forces e = 0, ell = 1 (whose discriminant is 4m).  Otherwise
    ell^2 m (q^2 - p^2 k)^2 = e^2 q^2 p^2 k is scanned over the divisors ell of qp;
    e > 0 exactly when the ratio is below 1.
    """
    if min(p, q, k, m) <= 0:
        raise ValueError("p, q, k, m must be positive")
    if p * p * k == q * q:
        cand = DiscriminantCandidate(0, 1, 4 * m, True, "unit area ratio")
        return DiscriminantReport("D=m/4", m % k == 0, (cand,), (cand,))
    below = p * p * k < q * q
    diff2 = (q * q - p * p * k) ** 2
    cands = []
    for ell in range(1, p * q + 1):
        if (p * q) % ell:
            continue
        e2 = Fraction(ell * ell * m * diff2, q * q * p * p * k)
        if e2.denominator != 1 or math.isqrt(e2.numerator) ** 2 != e2.numerator:
            cands.append(DiscriminantCandidate(None, ell, None, False, "e^2 is not a square integer"))
            continue
        e = math.isqrt(e2.numerator) * (1 if below else -1)
        D = e * e + 4 * ell * ell * m
        checks = [
            (m % k == 0, "k does not divide m"),
            (math.gcd(e, ell) == 1, "gcd(e, ell) != 1"),
            ((m * diff2) % (e * e) == 0, "e^2 does not divide m (q^2 - p^2 k)^2"),
            (math.isqrt(D) ** 2 == D, "D is not a square"),
        ]
        failed = [msg for ok, msg in checks if not ok]
        cands.append(DiscriminantCandidate(e, ell, D, not failed, "; ".join(failed) or "ok"))
    cands = tuple(cands)
    return DiscriminantReport("square", m % k == 0, cands, tuple(c for c in cands if c.admissible))

