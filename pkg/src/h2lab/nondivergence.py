"""Length functions along horocycles, good-function checks, sparse covers and interval gadgets.

A lattice vector v = (x0, y0) moved by u_t = [[1, t], [0, 1]] has sup norm
max(|x0 + t y0|, |y0|) = max(c, c |t - t0|) with c = |y0|, t0 = -x0 / y0.
Everything built from such functions is computed exactly when the inputs are
rational.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations

import numpy as np

from .lattice import LatticeBasis, LatticePair, a_t, div, lattice_points

SQRT2 = math.sqrt(2.0)
SURFACE_R = 9  # edges of a triangulation of a genus-two surface with one cone point


def _q(x):
    """Exact rational for int/Fraction, exact binary value for floats."""
    return x if isinstance(x, Fraction) else Fraction(x)


# ----- length functions ----------------------------------------------------


@dataclass(frozen=True)
class LengthFn:
    kind: str  # "vee" or "constant"
    c: object
    t0: object = None
    source: object = None  # the vector or saddle connection it came from

    def __post_init__(self):
        if self.kind not in ("vee", "constant"):
            raise ValueError("kind must be 'vee' or 'constant'")
        if not self.c > 0:
            raise ValueError("c must be positive")
        if self.kind == "vee" and self.t0 is None:
            raise ValueError("a vee function needs t0")

    def __call__(self, t):
        if self.kind == "constant":
            return self.c
        d = t - self.t0
        return max(self.c, self.c * (d if d >= 0 else -d))

    def values(self, ts: np.ndarray) -> np.ndarray:
        c = float(self.c)
        if self.kind == "constant":
            return np.full(ts.shape, c)
        return np.maximum(c, c * np.abs(ts - float(self.t0)))

    def sup_on(self, I) -> object:
        """||f||_I for the closed interval I = (a, b)."""
        a, b = I
        if self.kind == "constant":
            return self.c
        return max(self(a), self(b))

    def below(self, theta) -> tuple | None:
        """Open interval {t : f(t) < theta} as (lo, hi) (None if empty; (-inf, inf) for constants)."""
        if theta <= self.c:
            return None
        if self.kind == "constant":
            return (-math.inf, math.inf)
        w = div(theta, self.c) if isinstance(theta, int) and isinstance(self.c, int) else theta / self.c
        return (self.t0 - w, self.t0 + w)


def length_fn_of_vector(v) -> LengthFn:
    x0, y0 = v
    if x0 == 0 and y0 == 0:
        raise ValueError("zero vector has no length function")
    if y0 == 0:
        return LengthFn("constant", abs(x0), None, tuple(v))
    t0 = div(-x0, y0) if isinstance(x0, int) and isinstance(y0, int) else -x0 / y0
    return LengthFn("vee", abs(y0), t0, tuple(v))


# ----- interval sets -------------------------------------------------------


@dataclass
class IntervalSet:
    """Disjoint sorted intervals; endpoints are treated as measure-zero."""

    intervals: list = field(default_factory=list)

    @classmethod
    def from_pieces(cls, pieces) -> IntervalSet:
        pieces = sorted((a, b) for a, b in pieces if a < b)
        out = []
        for a, b in pieces:
            if out and a <= out[-1][1]:
                if b > out[-1][1]:
                    out[-1] = (out[-1][0], b)
            else:
                out.append((a, b))
        return cls(out)

    def measure(self):
        return sum((b - a for a, b in self.intervals), 0)

    def __bool__(self):
        return bool(self.intervals)

    def clip(self, I) -> IntervalSet:
        a0, b0 = I
        return IntervalSet.from_pieces((max(a, a0), min(b, b0)) for a, b in self.intervals)

    def union(self, other: IntervalSet) -> IntervalSet:
        return IntervalSet.from_pieces(self.intervals + other.intervals)


def sublevel_set(f: LengthFn, I, eps) -> IntervalSet:
    """I_f(eps) = {s in I : f(s) < eps}."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    a, b = I
    piece = f.below(eps)
    if piece is None:
        return IntervalSet()
    lo, hi = piece
    return IntervalSet.from_pieces([(max(lo, a), min(hi, b))])


@dataclass(frozen=True)
class GoodCheck:
    ok: bool
    ratio: object  # |I_f(eps)| / |I|
    bound: object  # C (eps / ||f||_I)^alpha


def verify_good(f: LengthFn, I, eps, C=2, alpha=1) -> GoodCheck:
    """Check |I_f(eps)| / |I| <= C (eps / ||f||_I)^alpha (exact for rational data and integer alpha)."""
    a, b = I
    if not b > a:
        raise ValueError("interval must have positive length")
    exact = all(isinstance(x, (int, Fraction)) for x in (a, b, eps, f.c, f.t0 or 0))
    q = _q if exact else (lambda x: x)
    ratio = q(sublevel_set(f, I, eps).measure()) / q(b - a)
    base = q(eps) / q(f.sup_on(I))
    bound = C * base**alpha
    return GoodCheck(ratio <= bound, ratio, bound)


# ----- sparse cover on X ---------------------------------------------------


@dataclass
class GoodFamily:
    functions: list
    threshold: object = 1
    notes: dict = field(default_factory=dict)


def _primitive_vectors_dipping(L: LatticeBasis, I, theta) -> list:
    """Primitive vectors (one per +-pair) whose sup-norm length function goes below theta on I."""
    a, b = I
    T = max(abs(float(a)), abs(float(b)))
    radius = math.hypot(float(theta) * (1 + T), float(theta)) * (1 + 1e-9) + 1e-12
    out = []
    for m, n, w in lattice_points(L, radius):
        if math.gcd(m, n) != 1:
            continue
        x, y = w
        if y < 0 or (y == 0 and x < 0):
            continue
        f = length_fn_of_vector(w)
        piece = f.below(theta)
        if piece is None:
            continue
        lo, hi = piece
        if lo < b and hi > a:
            out.append(f)
    return out


def sparse_cover_X(pair: LatticePair, I, eta) -> GoodFamily:
    """Length functions of all primitive vectors of either lattice that dip below 1 on I."""
    if not 0 < eta < 1:
        raise ValueError("eta must lie in (0, 1)")
    fams = []
    for idx, L in enumerate(pair):
        for f in _primitive_vectors_dipping(L, I, 1):
            fams.append(LengthFn(f.kind, f.c, f.t0, (idx, f.source)))
    return GoodFamily(fams, 1, {"eta": eta, "interval": tuple(I)})


def _count_at(funcs, t, theta) -> int:
    return sum(1 for f in funcs if f(t) < theta)


def multiplicity(funcs, I, theta) -> int:
    """max over t in I of #{f : f(t) < theta}, exact: checked at every breakpoint and between them."""
    a, b = I
    pts = {a, b}
    for f in funcs:
        piece = f.below(theta)
        if piece is not None:
            for p in piece:
                if a < p < b:
                    pts.add(p)
    pts = sorted(pts)
    cand = list(pts) + [(p + q) / 2 for p, q in zip(pts, pts[1:])]
    return max((_count_at(funcs, t, theta) for t in cand), default=0)


class _Alg:
    """The real number a + s sqrt(q) with a, q rational, s in {-1, 0, 1}."""

    __slots__ = ("a", "s", "q")

    def __init__(self, a, s=0, q=0):
        self.a, self.s, self.q = Fraction(a), s, Fraction(q)

    def cmp(self, r) -> int:
        """Sign of self - r for rational r."""
        d = self.a - Fraction(r)
        if self.s == 0 or self.q == 0:
            return (d > 0) - (d < 0)
        if d == 0:
            return self.s
        if (d > 0) == (self.s > 0):
            return 1 if d > 0 else -1
        # opposite signs: compare d^2 with q
        diff = d * d - self.q
        if diff == 0:
            return 0
        return (1 if d > 0 else -1) if diff > 0 else self.s

    def __float__(self):
        return float(self.a) + self.s * math.sqrt(float(self.q))


def _euclid_interval(v, eta):
    """{r : |u_r v| < eta} as a pair of _Alg endpoints, None if empty, 'all' if constant and short."""
    x, y = (Fraction(v[0]), Fraction(v[1]))
    eta = Fraction(eta)
    if y == 0:
        return "all" if x * x < eta * eta else None
    if y * y >= eta * eta:
        return None
    t0 = -x / y
    q = (eta * eta - y * y) / (y * y)
    return _Alg(t0, -1, q), _Alg(t0, 1, q)


@dataclass
class CoverReport:
    multiplicity: int  # max #{f : f(t) < 1} over I, both lattices together
    per_lattice: tuple  # the same count for each lattice separately
    multiplicity_at_eta: int  # max #{f : f(t) < eta}
    covered: bool
    uncovered: list
    n_functions: int


def _components(funcs, I, theta):
    """Merged open sublevel components clipped to I as (lo, hi, lo_closed, hi_closed)."""
    a, b = I
    pieces = []
    for f in funcs:
        piece = f.below(theta)
        if piece is None:
            continue
        lo, hi = piece
        lo_c, hi_c = False, False
        if lo <= a:
            lo, lo_c = a, True if lo < a else False
        if hi >= b:
            hi, hi_c = b, True if hi > b else False
        if lo < hi or (lo == hi and lo_c and hi_c):
            pieces.append((lo, hi, lo_c, hi_c))
    pieces.sort(key=lambda p: (p[0], not p[2]))
    merged = []
    for p in pieces:
        if merged:
            lo, hi, lc, hc = merged[-1]
            # open (lo, hi) and (p0, p1) overlap when p0 < hi, or touch at a point one of them contains
            if p[0] < hi or (p[0] == hi and (hc or p[2])):
                if p[1] > hi or (p[1] == hi and p[3]):
                    merged[-1] = (lo, p[1], lc, p[3] if p[1] > hi else (hc or p[3]))
                continue
        merged.append(p)
    return merged


def coverage_X(pair: LatticePair, family: GoodFamily, I, eta) -> tuple[bool, list]:
    """Exact check that {r in I : systole(u_r pair) < eta} lies in the union of {f < eta}."""
    a, b = I
    comps = _components(family.functions, I, eta)
    bad = []
    for L in pair:
        T = max(abs(float(a)), abs(float(b)))
        radius = math.hypot(float(eta) * (1 + T), float(eta)) * (1 + 1e-9) + 1e-12
        for m, n, w in lattice_points(L, radius):
            if math.gcd(m, n) != 1:
                continue
            seg = _euclid_interval(w, eta)
            if seg is None:
                continue
            if seg == "all":
                left, l_in, right, r_in = _Alg(a), True, _Alg(b), True
            else:
                lo, hi = seg
                if lo.cmp(b) >= 0 or hi.cmp(a) <= 0:
                    continue
                if lo.cmp(a) < 0:
                    left, l_in = _Alg(a), True
                else:
                    left, l_in = lo, False
                if hi.cmp(b) > 0:
                    right, r_in = _Alg(b), True
                else:
                    right, r_in = hi, False
            if not any(_inside(left, l_in, right, r_in, c) for c in comps):
                bad.append((tuple(w), float(left), float(right)))
    return not bad, bad


def _inside(left: _Alg, l_in: bool, right: _Alg, r_in: bool, comp) -> bool:
    lo, hi, lc, hc = comp
    cl = left.cmp(lo)
    if cl < 0 or (cl == 0 and l_in and not lc):
        return False
    cr = right.cmp(hi)
    if cr > 0 or (cr == 0 and r_in and not hc):
        return False
    return True


def verify_cover_X(pair: LatticePair, family: GoodFamily, I, eta) -> CoverReport:
    funcs = family.functions
    mult = multiplicity(funcs, I, family.threshold)
    per = tuple(multiplicity([f for f in funcs if f.source[0] == idx], I, family.threshold) for idx in (0, 1))
    ok, bad = coverage_X(pair, family, I, eta)
    return CoverReport(mult, per, multiplicity(funcs, I, eta), ok, bad, len(funcs))


# ----- flow statistics -----------------------------------------------------


class SublevelBudgetExceeded(RuntimeError):
    pass


def flow_sublevel_measure(pair: LatticePair, t, eps, I, budget: int = 2_000_000) -> float:
    """|{r in I : systole(a_t u_r pair) < eps^2}|, as the length of a union of explicit intervals.

    For v = (x, y): |a_t u_r v|^2 = e^t (x + r y)^2 + e^-t y^2, so each vector
    contributes r in t0 +- sqrt(e^-t (eps^4 - e^-t y^2)) / |y|.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    a, b = (float(I[0]), float(I[1]))
    if not b > a:
        raise ValueError("interval must have positive length")
    et = math.exp(float(t))
    e4 = float(eps) ** 4
    ymax = math.sqrt(et * e4)
    T = max(abs(a), abs(b))
    pieces = []
    for L in pair:
        Lf = L.to_float()
        radius = math.hypot(ymax * (1 + T) + math.sqrt(e4 / et), ymax) * (1 + 1e-9)
        count = 0
        for m, n, (x, y) in lattice_points(Lf, radius):
            count += 1
            if count > budget:
                raise SublevelBudgetExceeded("too many lattice vectors for the exact sublevel computation")
            if (m, n) == (0, 0) or math.gcd(m, n) != 1:
                continue
            if y == 0:
                if et * x * x < e4:
                    pieces.append((a, b))
                continue
            rest = e4 - y * y / et
            if rest <= 0:
                continue
            w = math.sqrt(rest / et) / abs(y)
            t0 = -x / y
            lo, hi = max(t0 - w, a), min(t0 + w, b)
            if lo < hi:
                pieces.append((lo, hi))
    return float(IntervalSet.from_pieces(pieces).measure())


def systole_along(pair: LatticePair, t, rs: np.ndarray) -> np.ndarray:
    """Euclidean systole of a_t u_r pair for every r in rs (vectorized Gauss reduction)."""
    from .lattice import reduced_matrices

    out = np.full(rs.shape, np.inf)
    g = a_t(t).to_numpy()
    for L in pair:
        B = L.to_float().matrix.to_numpy()
        U = np.zeros((rs.size, 2, 2))
        U[:, 0, 0] = U[:, 1, 1] = 1
        U[:, 0, 1] = rs
        M = g @ U @ B
        R = reduced_matrices(M)
        out = np.minimum(out, np.hypot(R[:, 0, 0], R[:, 1, 0]))
    return out


# ----- interval gadgets ----------------------------------------------------


class GadgetPrecondition(ValueError):
    pass


def _length(J):
    return J[1] - J[0]


def _doubled(J):
    h = _length(J) / 2
    return (J[0] - h, J[1] + h)


def _contains(big, small) -> bool:
    return big[0] <= small[0] and small[1] <= big[1]


def _meets(J, I) -> bool:
    return J[0] <= I[1] and I[0] <= J[1]


def _concentric(I, Ip) -> bool:
    return I[0] + I[1] == Ip[0] + Ip[1]


def _outside(Jp, I, Ip) -> bool:
    """Jp inside Ip and disjoint from I."""
    return _contains(Ip, Jp) and (Jp[0] > I[1] or Jp[1] < I[0])


def _require(ok: bool, name: str) -> None:
    if not ok:
        raise GadgetPrecondition(f"precondition failed: {name}")


def _common_pre(D, I, Ip, J, B, A):
    _require(_concentric(I, Ip), "I and I' concentric")
    _require(2 * D * _length(I) <= _length(Ip), "2 D |I| <= |I'|")
    _require(_length(J) <= B, "|J| <= B")
    _require(A <= _length(I), "A <= |I|")
    _require(_meets(J, I), "J meets I")


def interval_gadget_1(A, B, D, E, I, Ip, J):
    """J' = [a + |J| + 2B, a + B + DA/2] for J = [a, a + |J|], or its mirror image on the left."""
    A, B, D, E = (_q(x) for x in (A, B, D, E))
    I, Ip, J = (tuple(_q(x) for x in K) for K in (I, Ip, J))
    _require(min(A, B, D, E) >= 10, "A, B, D, E >= 10")
    _require(A <= B, "A <= B")
    _require(D >= 6 * B * E / A, "D >= 6BE/A")
    _require(_length(I) <= B, "|I| <= B")
    _common_pre(D, I, Ip, J, B, A)
    a, lj = J[0], _length(J)
    Jp = (a + lj + 2 * B, a + B + D * A / 2)
    if not _contains(Ip, Jp):
        b = J[1]
        Jp = (b - B - D * A / 2, b - lj - 2 * B)
    checks = {
        "2J' contains 2J": _contains(_doubled(Jp), _doubled(J)),
        "|J'| >= (E/2)(|I| + |J|)": _length(Jp) >= E / 2 * (_length(I) + lj),
        "J' inside I' minus I": _outside(Jp, I, Ip),
    }
    _conclude(checks)
    return Jp


def interval_gadget_2(A, B, D, E, I, Ip, J):
    """J' = [b, b + E|J|] next to the endpoint b of J lying outside I (mirrored for the left endpoint)."""
    A, B, D, E = (_q(x) for x in (A, B, D, E))
    I, Ip, J = (tuple(_q(x) for x in K) for K in (I, Ip, J))
    _common_pre(D, I, Ip, J, B, A)
    lj = _length(J)
    if J[1] > I[1]:
        Jp = (J[1], J[1] + E * lj)
    elif J[0] < I[0]:
        Jp = (J[0] - E * lj, J[0])
    else:
        raise GadgetPrecondition("precondition failed: an endpoint of J lies outside I")
    checks = {
        "2J' contains 2J": _contains(_doubled(Jp), _doubled(J)),
        "|J'| = E|J|": _length(Jp) == E * lj,
        "J' inside I' minus I": _outside(Jp, I, Ip),
    }
    _conclude(checks)
    return Jp


def _conclude(checks: dict) -> None:
    failed = [k for k, ok in checks.items() if not ok]
    if failed:
        raise ArithmeticError("gadget conclusion failed: " + ", ".join(failed))


# ----- sparse cover for a surface ------------------------------------------


@dataclass
class SurfaceCoverReport:
    C: float
    R: int
    thresholds: list  # L_1 .. L_R
    families: dict  # k -> list of connection indices
    V: IntervalSet  # {s in I : systole(u_s x) < C^2}
    covered: bool
    uncovered: list
    multiplicity: int  # observed max count, the R-hat of the run
    alpha_R_min: float  # min over the grid of alpha_R, which should stay >= C
    complete: bool  # whether Lmax reaches the length needed to see every relevant connection
    Lmax_needed: float
    grid_size: int
    connections: list = field(default_factory=list)


def _sup_lengths(hols: np.ndarray, ts: np.ndarray) -> np.ndarray:
    """l_delta(t) for all connections (rows) and times (columns)."""
    x, y = hols[:, 0:1], hols[:, 1:2]
    return np.maximum(np.abs(x + ts[None, :] * y), np.abs(y))


def _max_disjoint(candidates: list[int], crosses: np.ndarray, cap: int) -> int:
    """Largest pairwise-disjoint subset size among candidates (brute force, stops at cap)."""
    best = 0
    n = len(candidates)
    for size in range(1, min(n, cap) + 1):
        found = False
        for combo in combinations(candidates, size):
            if all(not crosses[i, j] for i, j in combinations(combo, 2)):
                found = True
                break
        if not found:
            break
        best = size
    return best


def connection_chords(tr, sc) -> list:
    """Pieces of a saddle connection inside each triangle, in that triangle's own coordinates."""
    s = tr.surface
    hx, hy = float(sc.holonomy[0]), float(sc.holonomy[1])
    out = []
    for t, off in sc.path:
        ox, oy = float(off[0]), float(off[1])
        e0, e1, _ = s.triangles[t]
        p0 = (0.0, 0.0)
        p1 = (float(e0[0]), float(e0[1]))
        p2 = (p1[0] + float(e1[0]), p1[1] + float(e1[1]))
        lo, hi = 0.0, 1.0
        for P, Q in ((p0, p1), (p1, p2), (p2, p0)):
            # inside means cross(Q - P, X - P) >= 0 for X = s * h - off
            ex, ey = Q[0] - P[0], Q[1] - P[1]
            base = ex * (-oy - P[1]) - ey * (-ox - P[0])
            slope = ex * hy - ey * hx
            if abs(slope) < 1e-15:
                if base < -1e-12:
                    lo, hi = 1.0, 0.0
                continue
            s0 = -base / slope
            if slope > 0:
                lo = max(lo, s0)
            else:
                hi = min(hi, s0)
        if hi - lo > 1e-12:
            out.append((t, (lo * hx - ox, lo * hy - oy), (hi * hx - ox, hi * hy - oy)))
    return out


def _segments_cross(p, q, r, s, verts) -> bool:
    """Do the segments pq and rs share a point other than a triangle vertex (the cone point)?"""
    d1 = (q[0] - p[0], q[1] - p[1])
    d2 = (s[0] - r[0], s[1] - r[1])
    den = d1[0] * d2[1] - d1[1] * d2[0]
    scale = math.hypot(*d1) * math.hypot(*d2)
    if abs(den) <= 1e-12 * scale:
        return False  # parallel pieces of distinct connections never overlap
    w = (r[0] - p[0], r[1] - p[1])
    u = (w[0] * d2[1] - w[1] * d2[0]) / den
    v = (w[0] * d1[1] - w[1] * d1[0]) / den
    tol = 1e-9
    if not (-tol <= u <= 1 + tol and -tol <= v <= 1 + tol):
        return False
    x = (p[0] + u * d1[0], p[1] + u * d1[1])
    size = max(1.0, math.hypot(*d1), math.hypot(*d2))
    return all(math.hypot(x[0] - vx, x[1] - vy) > 1e-7 * size for vx, vy in verts)


def crossing_matrix(tr, conns) -> np.ndarray:
    """crosses[i, j] is True when connections i and j meet away from the cone point."""
    s = tr.surface
    chords = [connection_chords(tr, sc) for sc in conns]
    verts = {}
    for t, tri in enumerate(s.triangles):
        e0, e1, _ = tri
        p1 = (float(e0[0]), float(e0[1]))
        verts[t] = [(0.0, 0.0), p1, (p1[0] + float(e1[0]), p1[1] + float(e1[1]))]
    by_tri: dict[int, list] = {}
    for i, ch in enumerate(chords):
        for t, p, q in ch:
            by_tri.setdefault(t, []).append((i, p, q))
    n = len(conns)
    crosses = np.zeros((n, n), dtype=bool)
    for t, items in by_tri.items():
        for (i, p, q), (j, r, w) in combinations(items, 2):
            if i != j and not crosses[i, j] and _segments_cross(p, q, r, w, verts[t]):
                crosses[i, j] = crosses[j, i] = True
    return crosses


def sparse_cover_surface(s, I, C: float, Lmax: float, grid: int = 2001, R: int = SURFACE_R, refine: int = 4):
    """Multiscale cover of {s in I : systole(u_s x) < C^2} by length functions of saddle connections.

    Thresholds L_k = C^((R-k)/(R-1)) C.  For t in the set, r(t) = max{k : alpha_k(t) < L_k};
    a connection joins family k when, at some grid time with r(t) = k, it is below L_k while
    every connection crossing it stays >= (sqrt 2 / 3) L_{k+1}.
    """
    from .surface import _as_triangulation, enumerate_saddle_connections

    tr = _as_triangulation(s)
    a, b = float(I[0]), float(I[1])
    T = max(abs(a), abs(b))
    Ls = [C ** ((R - k) / (R - 1)) * C for k in range(1, R + 1)]
    need = SQRT2 * C * (1 + T)
    allc = enumerate_saddle_connections(tr, Lmax)
    # one orientation per segment: reversing a connection negates its holonomy
    conns = [sc for sc in allc if sc.holonomy[1] > 0 or (sc.holonomy[1] == 0 and sc.holonomy[0] > 0)]
    hols = np.array([[float(sc.holonomy[0]), float(sc.holonomy[1])] for sc in conns]).reshape(-1, 2)
    V = _surface_sublevel(hols, (a, b), C * C)
    crosses = crossing_matrix(tr, conns) if conns else np.zeros((0, 0), dtype=bool)
    ts = np.linspace(a, b, grid)
    families: dict[int, set] = {k: set() for k in range(1, R)}
    alpha_R_min = math.inf
    for _ in range(refine + 1):
        ts = np.unique(np.concatenate([ts, _endpoints_inside(V, (a, b))]))
        alpha_R_min = min(alpha_R_min, _assign(ts, hols, crosses, Ls, R, V, families))
        comps = {k: [_fn(conns[i], hols[i]) for i in sorted(fam)] for k, fam in families.items()}
        cover = IntervalSet.from_pieces(
            p for k in range(1, R) for f in comps[k] for p in [sublevel_set(f, (a, b), Ls[k - 1])] for p in p.intervals
        )
        gaps = _difference(V, cover)
        if not gaps:
            break
        ts = np.concatenate([ts] + [np.linspace(lo, hi, 7)[1:-1] for lo, hi in gaps])
    mult = 0
    for k in range(1, R):
        fam = sorted(families[k])
        if fam:
            theta = SQRT2 / 9 * Ls[k]
            mult = max(mult, multiplicity([_fn(conns[i], hols[i]) for i in fam], (a, b), theta) if theta > 0 else 0)
    return SurfaceCoverReport(
        C=C,
        R=R,
        thresholds=Ls,
        families={k: sorted(v) for k, v in families.items() if v},
        V=V,
        covered=not gaps,
        uncovered=gaps,
        multiplicity=mult,
        alpha_R_min=alpha_R_min,
        complete=float(Lmax) >= need,
        Lmax_needed=need,
        grid_size=int(ts.size),
        connections=conns,
    )


def _fn(sc, hol) -> LengthFn:
    f = length_fn_of_vector((float(hol[0]), float(hol[1])))
    return LengthFn(f.kind, f.c, f.t0, sc)


def _surface_sublevel(hols: np.ndarray, I, theta) -> IntervalSet:
    """{s in I : min over connections of |u_s hol| < theta} (Euclidean lengths)."""
    a, b = I
    pieces = []
    for x, y in hols:
        if y == 0:
            if abs(x) < theta:
                pieces.append((a, b))
            continue
        rest = theta * theta - y * y
        if rest <= 0:
            continue
        w = math.sqrt(rest) / abs(y)
        t0 = -x / y
        lo, hi = max(t0 - w, a), min(t0 + w, b)
        if lo < hi:
            pieces.append((lo, hi))
    return IntervalSet.from_pieces(pieces)


def _endpoints_inside(V: IntervalSet, I) -> np.ndarray:
    pts = []
    for lo, hi in V.intervals:
        pts.extend(np.linspace(lo, hi, 5))
    return np.array(pts, dtype=float)


def _difference(V: IntervalSet, cover: IntervalSet, tol: float = 1e-12) -> list:
    """Parts of V not in cover, ignoring slivers below tol."""
    gaps = []
    for lo, hi in V.intervals:
        cur = lo
        for clo, chi in cover.intervals:
            if chi <= cur or clo >= hi:
                continue
            if clo > cur + tol:
                gaps.append((cur, clo))
            cur = max(cur, chi)
            if cur >= hi:
                break
        if cur < hi - tol:
            gaps.append((cur, hi))
    return gaps


def _assign(ts, hols, crosses, Ls, R, V, families) -> float:
    """Add family members witnessed at the grid times; returns min alpha_R seen."""
    if hols.shape[0] == 0:
        return math.inf
    lens = _sup_lengths(hols, ts)
    eu = np.hypot(hols[:, 0:1] + ts[None, :] * hols[:, 1:2], hols[:, 1:2])
    top = Ls[-1]
    alpha_R_min = math.inf
    for col, t in enumerate(ts):
        if not eu[:, col].min() < Ls[0]:
            continue
        l = lens[:, col]
        order = [int(i) for i in np.argsort(l, kind="stable") if l[i] < top]
        # alpha_k(t) < L_k  <=>  k disjoint connections all below L_k
        r = 0
        for k in range(1, R + 1):
            cands = [i for i in order if l[i] < Ls[k - 1]]
            if _max_disjoint(cands, crosses, k) >= k:
                r = k
        if r >= R:
            alpha_R_min = min(alpha_R_min, float(l[order[R - 1]]) if len(order) >= R else math.inf)
            continue
        if r == 0:
            continue
        Lk, Lk1 = Ls[r - 1], Ls[r]
        for i in order:
            if l[i] >= Lk:
                break
            nb = np.nonzero(crosses[i])[0]
            if nb.size == 0 or np.all(l[nb] >= SQRT2 / 3 * Lk1):
                families[r].add(i)
    return alpha_R_min
