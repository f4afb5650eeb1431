"""Genus-two translation surfaces with one cone point, built from splitting triples.

A surface is stored as six positively oriented triangles glued edge to edge by
translations.  Triangle t has edge vectors E[t][0..2] (summing to zero), with
vertices P0 = 0, P1 = E0, P2 = E0 + E1; edge k runs from P_k to P_{k+1}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .exactnum import is_exact
from .lattice import (
    LatticeBasis,
    LatticePair,
    Mat2,
    Vec,
    cross,
    div,
    dot,
    gauss_reduce,
    norm_sq,
    normalize_lattice,
    vadd,
    vfloat,
    vscale,
    vsub,
)
from .splitting import SplittingTriple, checked

HalfEdge = tuple  # (triangle, edge index)

DEFAULT_NODE_BUDGET = 2_000_000


class BudgetExceeded(RuntimeError):
    """Saddle-connection tracing needed more work than the configured budget."""


class DegenerateTriangle(ValueError):
    def __init__(self, message: str, triangle: int):
        super().__init__(message)
        self.triangle = triangle


def _orient_tol(u: Vec, v: Vec) -> float:
    return 1e-12 * math.sqrt(float(norm_sq(u)) * float(norm_sq(v)))


def _positive(u: Vec, v: Vec, exact: bool) -> bool:
    c = cross(u, v)
    return c > 0 if exact else float(c) > _orient_tol(u, v)


@dataclass
class SurfaceH2:
    """Triangulated translation surface: edge vectors plus edge pairings."""

    triangles: list  # list of (E0, E1, E2)
    gluing: dict  # HalfEdge -> HalfEdge
    sides: list = field(default_factory=list)  # torus label per triangle (1, 2 or 0 once mixed)
    preferred_basis: list = field(default_factory=list)  # half-edges preferred as period basis
    parallelograms: list = field(default_factory=list)  # normal-form pieces as vertex loops

    def __post_init__(self):
        if not self.sides:
            self.sides = [0] * len(self.triangles)
        self._check()

    @property
    def exact(self) -> bool:
        return all(is_exact(x) for tri in self.triangles for e in tri for x in e)

    def _check(self) -> None:
        exact = self.exact
        for t, (e0, e1, e2) in enumerate(self.triangles):
            s = vadd(vadd(e0, e1), e2)
            if exact:
                if s != (0, 0):
                    raise ValueError(f"edges of triangle {t} do not close up")
            elif abs(float(s[0])) + abs(float(s[1])) > 1e-9 * (1 + sum(abs(float(x)) for e in (e0, e1) for x in e)):
                raise ValueError(f"edges of triangle {t} do not close up")
            if not _positive(e0, e1, exact):
                raise DegenerateTriangle(f"triangle {t} is degenerate or negatively oriented", t)
        for h, h2 in self.gluing.items():
            if self.gluing[h2] != h:
                raise ValueError(f"gluing is not an involution at {h}")
            a, b = self.edge(h), self.edge(h2)
            if exact:
                if vadd(a, b) != (0, 0):
                    raise ValueError(f"glued edges {h}, {h2} do not have opposite holonomy")
            elif abs(float(a[0] + b[0])) + abs(float(a[1] + b[1])) > 1e-9 * (1 + abs(float(a[0])) + abs(float(a[1]))):
                raise ValueError(f"glued edges {h}, {h2} do not have opposite holonomy")

    def edge(self, h: HalfEdge) -> Vec:
        return self.triangles[h[0]][h[1]]

    def vertex(self, t: int, i: int) -> Vec:
        e0, e1, _ = self.triangles[t]
        return [(0, 0), e0, vadd(e0, e1)][i % 3]

    def area(self):
        total = 0
        for e0, e1, _ in self.triangles:
            total = total + div(cross(e0, e1), 2)
        return total

    def to_float(self) -> SurfaceH2:
        return SurfaceH2(
            [tuple(vfloat(e) for e in tri) for tri in self.triangles],
            dict(self.gluing),
            list(self.sides),
            list(self.preferred_basis),
            [[vfloat(p) for p in loop] for loop in self.parallelograms],
        )

    def act(self, g: Mat2) -> SurfaceH2:
        if not g.det > 0:
            raise ValueError("act needs det(g) > 0")
        return SurfaceH2(
            [tuple(g @ e for e in tri) for tri in self.triangles],
            dict(self.gluing),
            list(self.sides),
            list(self.preferred_basis),
            [[g @ p for p in loop] for loop in self.parallelograms],
        )

    def scaled(self, s) -> SurfaceH2:
        return self.act(Mat2(s, 0, 0, s))

    def vertex_classes(self) -> list[list[tuple[int, int]]]:
        parent = {(t, i): (t, i) for t in range(len(self.triangles)) for i in range(3)}

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for (t, k), (t2, k2) in self.gluing.items():
            for a, b in (((t, k), (t2, (k2 + 1) % 3)), ((t, (k + 1) % 3), (t2, k2))):
                ra, rb = find(a), find(b)
                if ra != rb:
                    parent[ra] = rb
        classes: dict = {}
        for c in parent:
            classes.setdefault(find(c), []).append(c)
        return list(classes.values())

    def corner_angle(self, t: int, i: int) -> float:
        u = vfloat(self.edge((t, i)))
        w = vfloat(vscale(-1, self.edge((t, (i + 2) % 3))))
        return math.atan2(u[0] * w[1] - u[1] * w[0], u[0] * w[0] + u[1] * w[1])

    def cone_angles(self) -> list[float]:
        return [sum(self.corner_angle(t, i) for t, i in cls) for cls in self.vertex_classes()]

    def euler_characteristic(self) -> int:
        f = len(self.triangles)
        return len(self.vertex_classes()) - 3 * f // 2 + f

    def genus(self) -> int:
        return (2 - self.euler_characteristic()) // 2

    def to_json(self) -> dict:
        from .lattice import _scalar_json

        polys = []
        for t in range(len(self.triangles)):
            polys.append([[_scalar_json(x) for x in self.vertex(t, i)] for i in range(3)])
        glue = sorted([list(h), list(h2)] for h, h2 in self.gluing.items() if h < h2)
        return {"polygons": polys, "gluings": glue, "cone_point": 0}


# ----- construction --------------------------------------------------------


def _neg(u: Vec) -> Vec:
    return vscale(-1, u)


def _pair(glue: dict, h1: HalfEdge, h2: HalfEdge) -> None:
    glue[h1] = h2
    glue[h2] = h1


def _adapted_basis(L: LatticeBasis, v: Vec):
    """Basis (e, f) of L with det > 0 and v = alpha e + beta f.

    Either alpha, beta lie in (0, 1), so v is strictly inside the fundamental
    parallelogram, or beta = 0 < alpha < 1 and v is parallel to the lattice vector e.
    """
    exact = L.exact and all(is_exact(x) for x in v)
    if not exact:
        L, v = L.to_float(), vfloat(v)
    L = L.oriented()
    e, f, _ = gauss_reduce(L.e1, L.e2)
    al, be = LatticeBasis(e, f).coordinates(v)
    if not exact:
        scale = max(abs(al), abs(be))
        al, be = (0.0 if abs(c) < 1e-12 * scale else c for c in (al, be))
    for _ in range(4):
        if al > 0 and be >= 0:
            break
        e, f, al, be = f, _neg(e), be, -al
    # Euclid on the coordinates: (e, f) -> (e, f + q e) or (e + q f, f)
    for _ in range(10_000):
        if be == 0 or (al < 1 and be < 1):
            if al >= 1:
                raise ValueError("slit passes through a lattice point")
            return e, f, al, be
        if al == be:
            raise ValueError("slit passes through a lattice point")
        if al >= 1 and be < 1:
            q = math.floor(div(al - 1, be)) + 1
        elif be >= 1 and al < 1:
            q = math.floor(div(be - 1, al)) + 1
        else:
            big, small = (al, be) if al > be else (be, al)
            q = math.floor(div(big, small))
            if big - q * small <= (0 if exact else 1e-12 * big):
                q -= 1
        if al > be:
            f = vadd(f, vscale(q, e))
            al = al - q * be
        else:
            e = vadd(e, vscale(q, f))
            be = be - q * al
    raise RuntimeError("adapted basis search did not terminate")


def connected_sum(t: SplittingTriple) -> SurfaceH2:
    """Glue the two slit tori along [0, v]; six triangles, one cone point of angle 6 pi."""
    t = checked(t)
    v = t.v
    L_slit, L_other = t.slit_lattice, t.other_lattice
    side_slit, side_other = (2, 1) if t.primitive_in == "second" else (1, 2)

    # slit torus: basis (v, b2) with det > 0, b2 reduced against v
    v, b2 = _adapted_basis_primitive(L_slit, v)

    e, f, al, be = _adapted_basis(L_other, v)
    glue: dict = {}
    parallelograms = []
    if be == 0:
        # v = al e: three-parallelogram normal form
        a1 = e
        tris = [
            (v, f, _neg(vadd(v, f))),  # 0: P2 lower
            (vadd(v, f), _neg(v), _neg(f)),  # 1: P2 upper
            (vsub(a1, v), f, _neg(vadd(vsub(a1, v), f))),  # 2: P3 lower
            (vadd(vsub(a1, v), f), _neg(vsub(a1, v)), _neg(f)),  # 3: P3 upper
            (v, b2, _neg(vadd(v, b2))),  # 4: P1 lower
            (vadd(v, b2), _neg(v), _neg(b2)),  # 5: P1 upper
        ]
        _pair(glue, (0, 2), (1, 0))
        _pair(glue, (2, 2), (3, 0))
        _pair(glue, (2, 0), (3, 1))
        _pair(glue, (0, 1), (3, 2))
        _pair(glue, (2, 1), (1, 2))
        _pair(glue, (4, 1), (5, 2))
        _pair(glue, (4, 2), (5, 0))
        # cross-glue the slit sides
        _pair(glue, (0, 0), (5, 1))
        _pair(glue, (4, 0), (1, 1))
        preferred = [(2, 0), (0, 1), (4, 0), (4, 1)]
        zero = (0, 0)
        parallelograms = [
            [zero, v, vadd(v, b2), b2],
            [zero, v, vadd(v, f), f],
            [v, a1, vadd(a1, f), vadd(v, f)],
        ]
    else:
        ef = vadd(e, f)
        tris = [
            (e, vsub(v, e), _neg(v)),  # 0: A
            (f, vsub(v, ef), _neg(vsub(v, e))),  # 1: B
            (_neg(e), vsub(v, f), _neg(vsub(v, ef))),  # 2: C
            (_neg(f), v, _neg(vsub(v, f))),  # 3: D
            (v, b2, _neg(vadd(v, b2))),  # 4: E
            (vadd(v, b2), _neg(v), _neg(b2)),  # 5: F
        ]
        _pair(glue, (0, 0), (2, 0))
        _pair(glue, (1, 0), (3, 0))
        _pair(glue, (0, 1), (1, 2))
        _pair(glue, (1, 1), (2, 2))
        _pair(glue, (2, 1), (3, 2))
        _pair(glue, (4, 1), (5, 2))
        _pair(glue, (4, 2), (5, 0))
        _pair(glue, (3, 1), (5, 1))
        _pair(glue, (4, 0), (0, 2))
        preferred = [(0, 0), (1, 0), (4, 0), (4, 1)]
    sides = [side_other] * 4 + [side_slit] * 2
    return SurfaceH2(tris, glue, sides, preferred, parallelograms)


def _adapted_basis_primitive(L: LatticeBasis, v: Vec):
    """Complete the primitive vector v to a positively oriented basis (v, b) of L, b reduced against v."""
    exact = L.exact and all(is_exact(x) for x in v)
    m, n = L.coordinates(v)
    if exact:
        if m != math.floor(m) or n != math.floor(n):
            raise ValueError("v is not a lattice vector")
    m, n = round(m), round(n)
    g, x, y = _ext_gcd(m, n)
    if g != 1:
        raise ValueError("v is not primitive")
    # m x + n y = 1, so det(v, b) = det(L) for b = -y e1 + x e2
    b = L.vector(-y, x)
    if L.det < 0:
        b = _neg(b)
    if not exact:
        v, b = vfloat(v), vfloat(b)
    mu = round(div(dot(v, b), norm_sq(v)))
    return v, vsub(b, vscale(mu, v))


def _ext_gcd(a: int, b: int):
    if b == 0:
        return (abs(a), 1 if a >= 0 else -1, 0)
    g, x, y = _ext_gcd(b, a % b)
    return g, y, x - (a // b) * y


# ----- triangulations and periods ------------------------------------------


@dataclass
class Triangulation:
    """A triangulated surface with edge classes and a chosen period basis."""

    surface: SurfaceH2
    edge_of: dict = field(default_factory=dict)  # HalfEdge -> (edge id, sign)
    edge_half: list = field(default_factory=list)  # edge id -> canonical HalfEdge
    basis: list = field(default_factory=list)  # 4 edge ids
    expr: np.ndarray | None = None  # (E, 4) integers: hol(edge) = expr @ hol(basis)

    def __post_init__(self):
        if not self.edge_of:
            self._classify()

    def _classify(self) -> None:
        s = self.surface
        halves = sorted(s.gluing)
        for h in halves:
            if h in self.edge_of:
                continue
            eid = len(self.edge_half)
            self.edge_half.append(h)
            self.edge_of[h] = (eid, 1)
            self.edge_of[s.gluing[h]] = (eid, -1)
        self.basis = self._choose_basis()
        self.expr = self._express()

    @property
    def n_edges(self) -> int:
        return len(self.edge_half)

    def edge_vector(self, eid: int) -> Vec:
        return self.surface.edge(self.edge_half[eid])

    def _choose_basis(self) -> list[int]:
        s = self.surface
        n_tri = len(s.triangles)
        preferred = []
        for h in s.preferred_basis:
            eid = self.edge_of[h][0]
            if eid not in preferred:
                preferred.append(eid)

        def lex(eid):
            x, y = vfloat(self.edge_vector(eid))
            return (x, y)

        rest = sorted((e for e in range(self.n_edges) if e not in preferred), key=lex)
        # greedy spanning tree of the dual graph, least preferred edges first
        order = list(reversed(rest)) + list(reversed(preferred))
        parent = list(range(n_tri))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        cotree = []
        for eid in order:
            h = self.edge_half[eid]
            a, b = find(h[0]), find(s.gluing[h][0])
            if a != b:
                parent[a] = b
            else:
                cotree.append(eid)
        want = self.n_edges - n_tri + 1
        if len(cotree) != want:
            raise ValueError("dual graph is not connected")
        rank = {eid: i for i, eid in enumerate(preferred + rest)}
        return sorted(cotree, key=lambda e: rank[e])

    def _express(self) -> np.ndarray:
        nb = len(self.basis)
        known: dict[int, np.ndarray] = {}
        for j, eid in enumerate(self.basis):
            row = np.zeros(nb, dtype=np.int64)
            row[j] = 1
            known[eid] = row
        tris = self.surface.triangles
        progress = True
        while progress and len(known) < self.n_edges:
            progress = False
            for t in range(len(tris)):
                ids = [self.edge_of[(t, k)] for k in range(3)]
                unknown = [(eid, sg) for eid, sg in ids if eid not in known]
                if len({eid for eid, _ in unknown}) != 1:
                    continue
                eid, sg = unknown[0]
                if len(unknown) != 1:
                    continue
                total = np.zeros(nb, dtype=np.int64)
                for e2, s2 in ids:
                    if e2 != eid:
                        total += s2 * known[e2]
                known[eid] = -sg * total
                progress = True
        if len(known) < self.n_edges:
            raise ValueError("could not express all edges in the period basis")
        return np.array([known[e] for e in range(self.n_edges)])

    def class_vector(self, h: HalfEdge) -> np.ndarray:
        eid, sg = self.edge_of[h]
        return sg * self.expr[eid]


def geodesic_triangulation(s: SurfaceH2) -> Triangulation:
    if len(s.triangles) != 6 or len(s.gluing) != 18:
        raise ValueError("expected 6 triangles and 9 edges")
    if len(s.vertex_classes()) != 1:
        raise ValueError("expected a single vertex class")
    return Triangulation(s)


PeriodVector = tuple  # four 2-vectors


def periods(tr: Triangulation) -> PeriodVector:
    return tuple(tr.edge_vector(eid) for eid in tr.basis)


def evaluate_cocycle(c: PeriodVector, coeffs) -> Vec:
    x, y = 0, 0
    for n, (cx, cy) in zip(coeffs, c):
        n = int(n)
        if n:
            x, y = x + n * cx, y + n * cy
    return (x, y)


def rebuild_from_periods(tr: Triangulation, p: PeriodVector) -> SurfaceH2:
    """Reassemble the triangles from new basis periods; fail if any triangle flips."""
    s = tr.surface
    tris = []
    for t in range(len(s.triangles)):
        tri = tuple(evaluate_cocycle(p, tr.class_vector((t, k))) for k in range(3))
        exact = all(is_exact(x) for e in tri for x in e)
        if not _positive(tri[0], tri[1], exact):
            raise DegenerateTriangle(f"triangle {t} degenerates or flips under the new periods", t)
        tris.append(tri)
    return SurfaceH2(tris, dict(s.gluing), list(s.sides), list(s.preferred_basis), [])


# ----- saddle connections --------------------------------------------------


@dataclass(frozen=True)
class SaddleConnection:
    holonomy: Vec
    coeffs: tuple  # class in the period basis
    path: tuple  # ((triangle, offset of its vertex 0), ...)

    @property
    def length(self) -> float:
        return math.hypot(float(self.holonomy[0]), float(self.holonomy[1]))


def _wedge_interval(p: Vec, q: Vec, lo: Vec, hi: Vec):
    """Parameter range s in [0,1] for which p + s (q - p) lies in the closed cone (lo, hi)."""
    d = vsub(q, p)
    s0, s1 = 0, 1
    for a, b in ((cross(lo, p), cross(lo, d)), (cross(p, hi), cross(d, hi))):
        # need a + s b >= 0
        if b == 0:
            if a < 0:
                return None
        elif b > 0:
            s0 = max(s0, div(-a, b))
        else:
            s1 = min(s1, div(-a, b))
    if s0 > s1:
        return None
    return s0, s1


def _min_dist_sq(p: Vec, q: Vec, rng) -> object:
    s0, s1 = rng
    d = vsub(q, p)
    dd = norm_sq(d)
    s = div(-dot(p, d), dd)
    s = min(max(s, s0), s1)
    x = vadd(p, vscale(s, d))
    return norm_sq(x)


class _Tracer:
    def __init__(self, tr: Triangulation, L2, budget: int):
        s = tr.surface
        self.tr = tr
        self.s = s
        self.exact = s.exact and is_exact(L2)
        if self.exact:
            self.L2 = L2
            self.tris = s.triangles
        else:
            self.L2 = float(L2)
            self.tris = [tuple(vfloat(e) for e in tri) for tri in s.triangles]
        self.budget = budget
        self.nodes = 0
        self.found: list[SaddleConnection] = []
        self.cls = {h: tr.class_vector(h) for h in s.gluing}
        self.periods = periods(tr)

    def inside(self, lo: Vec, r: Vec, hi: Vec) -> int:
        """+1 strictly inside, 0 on/behind lo, 2 on/behind hi."""
        c1, c2 = cross(lo, r), cross(r, hi)
        if self.exact:
            if c1 <= 0:
                return 0
            if c2 <= 0:
                return 2
            return 1
        if c1 <= _orient_tol(lo, r):
            return 0
        if c2 <= _orient_tol(r, hi):
            return 2
        return 1

    def record(self, r: Vec, coeffs, link) -> None:
        if norm_sq(r) <= self.L2:
            path = []
            while link is not None:
                link, step = link
                path.append(step)
            path.reverse()
            # float holonomies are recomputed from the periods so that they agree
            # bit for bit with any cocycle evaluation
            hol = r if self.exact else evaluate_cocycle(self.periods, coeffs)
            self.found.append(SaddleConnection(hol, tuple(int(x) for x in coeffs), tuple(path)))

    def run(self) -> list[SaddleConnection]:
        tris = self.tris
        for t in range(len(tris)):
            for i in range(3):
                e0, e2 = tris[t][i], tris[t][(i + 2) % 3]
                u, w = e0, _neg(e2)
                off = _neg(self._vertex(t, i))
                cu = self.cls[(t, i)]
                cw = cu + self.cls[(t, (i + 1) % 3)]
                path = (None, (t, off))  # linked list, newest step first
                self.record(u, cu, path)
                self.explore(t, (i + 1) % 3, u, w, cu, cw, u, w, path)
        self.found.sort(key=lambda sc: (float(norm_sq(sc.holonomy)), float(sc.holonomy[0]), float(sc.holonomy[1])))
        return self.found

    def _vertex(self, t: int, i: int) -> Vec:
        e0, e1, _ = self.tris[t]
        return [(0, 0), e0, vadd(e0, e1)][i % 3]

    def explore(self, t, k, p, q, cp, cq, lo, hi, path) -> None:
        stack = [(t, k, p, q, cp, cq, lo, hi, path)]
        glue = self.s.gluing
        while stack:
            t, k, p, q, cp, cq, lo, hi, path = stack.pop()
            self.nodes += 1
            if self.nodes > self.budget:
                raise BudgetExceeded(f"saddle-connection tracing exceeded {self.budget} steps")
            rng = _wedge_interval(p, q, lo, hi)
            if rng is None or _min_dist_sq(p, q, rng) > self.L2:
                continue
            t2, k2 = glue[(t, k)]
            k21, k22 = (k2 + 1) % 3, (k2 + 2) % 3
            r = vadd(p, self.tris[t2][k21])
            cr = cp + self.cls[(t2, k21)]
            # developed position of vertex 0 of t2: vertex k2 sits at q
            off = vsub(q, self._vertex(t2, k2))
            path2 = (path, (t2, off))
            where = self.inside(lo, r, hi)
            if where == 1:
                self.record(r, cr, path2)
                stack.append((t2, k21, p, r, cp, cr, lo, r, path2))
                stack.append((t2, k22, r, q, cr, cq, r, hi, path2))
            elif where == 0:
                stack.append((t2, k22, r, q, cr, cq, lo, hi, path2))
            else:
                stack.append((t2, k21, p, r, cp, cr, lo, hi, path2))


def _as_triangulation(s) -> Triangulation:
    return s if isinstance(s, Triangulation) else Triangulation(s)


def enumerate_saddle_connections(s, Lmax, budget: int = DEFAULT_NODE_BUDGET, Lmax_sq=None) -> list[SaddleConnection]:
    """All saddle connections of length <= Lmax, oriented (so closed under negation), length-sorted.

    Exact surfaces are traced with exact predicates; a float Lmax is then read as its exact binary value.
    """
    tr = _as_triangulation(s)
    if Lmax_sq is None:
        if not Lmax > 0:
            raise ValueError("Lmax must be positive")
        Lmax_sq = Lmax * Lmax
        if tr.surface.exact and isinstance(Lmax, float):
            Lmax_sq = Fraction(Lmax) ** 2
    elif not Lmax_sq > 0:
        raise ValueError("Lmax must be positive")
    return _Tracer(tr, Lmax_sq, budget).run()


def systole_sq_surface(s):
    """Squared systole; the shortest triangle edge bounds the search radius."""
    tr = _as_triangulation(s)
    shortest = min(norm_sq(tr.edge_vector(e)) for e in range(tr.n_edges))
    if not tr.surface.exact:
        shortest = float(shortest) * (1 + 1e-12)
    conns = enumerate_saddle_connections(tr, None, Lmax_sq=shortest)
    return min(norm_sq(sc.holonomy) for sc in conns)


def systole_surface(s) -> float:
    """Length of the shortest saddle connection."""
    return math.sqrt(float(systole_sq_surface(s)))


# ----- Delaunay flips ------------------------------------------------------


def _incircle(a: Vec, b: Vec, c: Vec, d: Vec):
    rows = []
    for p in (a, b, c):
        x, y = p[0] - d[0], p[1] - d[1]
        rows.append((x, y, x * x + y * y))
    (a1, a2, a3), (b1, b2, b3), (c1, c2, c3) = rows
    return a1 * (b2 * c3 - b3 * c2) - a2 * (b1 * c3 - b3 * c1) + a3 * (b1 * c2 - b2 * c1)


def _needs_flip(s: SurfaceH2, h: HalfEdge, exact: bool) -> bool:
    t, k = h
    t2, k2 = s.gluing[h]
    A = (0, 0)
    B = s.triangles[t][k]
    C = vadd(B, s.triangles[t][(k + 1) % 3])
    D = s.triangles[t2][(k2 + 1) % 3]
    if exact:
        return _incircle(A, B, C, D) > 0
    # opposite angles summing past pi; unlike the incircle determinant this is scale-free on slivers
    return _angle_at(C, A, B) + _angle_at(D, A, B) > math.pi * (1 + 1e-12)


def _angle_at(p: Vec, a: Vec, b: Vec) -> float:
    u = (float(a[0]) - float(p[0]), float(a[1]) - float(p[1]))
    w = (float(b[0]) - float(p[0]), float(b[1]) - float(p[1]))
    return math.atan2(abs(u[0] * w[1] - u[1] * w[0]), u[0] * w[0] + u[1] * w[1])


def _flip(s: SurfaceH2, h: HalfEdge) -> SurfaceH2:
    t, k = h
    t2, k2 = s.gluing[h]
    T, T2 = s.triangles[t], s.triangles[t2]
    A = (0, 0)
    B = T[k]
    C = vadd(B, T[(k + 1) % 3])
    D = T2[(k2 + 1) % 3]
    n1 = (vsub(D, A), vsub(C, D), vsub(A, C))
    n2 = (vsub(C, B), vsub(D, C), vsub(B, D))
    exact = s.exact
    if not (_positive(n1[0], n1[1], exact) and _positive(n2[0], n2[1], exact)):
        raise ValueError("flip would create a degenerate triangle")
    old_to_new = {
        (t2, (k2 + 1) % 3): (t, 0),
        (t, (k + 2) % 3): (t, 2),
        (t, (k + 1) % 3): (t2, 0),
        (t2, (k2 + 2) % 3): (t2, 2),
    }
    glue = {}
    for old, new in old_to_new.items():
        partner = s.gluing[old]
        glue[new] = old_to_new.get(partner, partner)
    glue[(t, 1)] = (t2, 1)
    glue[(t2, 1)] = (t, 1)
    for a, b in s.gluing.items():
        if a[0] not in (t, t2):
            glue[a] = old_to_new.get(b, b)
    tris = list(s.triangles)
    tris[t], tris[t2] = n1, n2
    sides = list(s.sides)
    sides[t] = sides[t2] = 0
    return SurfaceH2(tris, glue, sides, [], [])


def delaunay_refine(tr, max_flips: int | None = None) -> Triangulation:
    """Flip edges until every edge is locally Delaunay."""
    tr = _as_triangulation(tr)
    s = tr.surface
    exact = s.exact
    n_edges = len(s.gluing) // 2
    if max_flips is None:
        # a thin parallelogram shortens by one short edge per flip, so allow ~ longest/shortest flips per edge
        lens = [float(norm_sq(s.edge(h))) for h in s.gluing]
        ratio = math.sqrt(max(lens) / min(lens))
        max_flips = 10 * n_edges * n_edges + 4 * n_edges * math.ceil(ratio)
    flips = 0
    while True:
        bad = next((h for h in sorted(s.gluing) if _needs_flip(s, h, exact)), None)
        if bad is None:
            break
        if flips >= max_flips:
            raise RuntimeError(f"Delaunay flip loop exceeded {max_flips} flips")
        s = _flip(s, bad)
        flips += 1
    if flips == 0:
        return tr
    out = Triangulation(s)
    out.flips = flips
    return out


def is_delaunay(tr) -> bool:
    tr = _as_triangulation(tr)
    s = tr.surface
    return not any(_needs_flip(s, h, s.exact) for h in s.gluing)


# ----- AGY norm ------------------------------------------------------------


def agy_norm_on(conns, c: PeriodVector) -> float:
    """max |c(gamma)| / |hol(gamma)| over the given saddle connections."""
    best = 0
    for sc in conns:
        val = evaluate_cocycle(c, sc.coeffs)
        num, den = norm_sq(val), norm_sq(sc.holonomy)
        if is_exact(num) and is_exact(den):
            ratio = div(num, den)
        else:
            ratio = float(num) / float(den)
        if ratio > best:
            best = ratio
    return math.sqrt(float(best))


def default_agy_cutoff(s) -> float:
    return max(10.0, 4.0 / systole_surface(s))


def agy_norm_trunc(s, c: PeriodVector, Lmax=None) -> tuple[float, float]:
    """Truncated AGY norm of the cocycle c (given on the period basis); returns (estimate, Lmax)."""
    tr = _as_triangulation(s)
    sys_sq = systole_sq_surface(tr)
    sys_ = math.sqrt(float(sys_sq))
    if Lmax is None:
        Lmax = max(10.0, 4.0 / sys_)
    if float(Lmax) < sys_ * (1 - 1e-12):
        raise ValueError("Lmax is below the systole")
    if float(Lmax) ** 2 <= float(sys_sq) * (1 + 1e-12):
        # a cutoff at the systole itself must keep the systole despite rounding
        conns = enumerate_saddle_connections(tr, None, Lmax_sq=sys_sq if tr.surface.exact else float(sys_sq) * (1 + 1e-12))
    else:
        conns = enumerate_saddle_connections(tr, Lmax)
    return agy_norm_on(conns, c), Lmax


def transform_connections(conns, g: Mat2):
    return [SaddleConnection(g @ sc.holonomy, sc.coeffs, sc.path) for sc in conns]


def transform_periods(p: PeriodVector, g: Mat2) -> PeriodVector:
    return tuple(g @ w for w in p)


def rotate_quarter(p: PeriodVector) -> PeriodVector:
    return tuple((-w[1], w[0]) for w in p)


# ----- absolute periods ----------------------------------------------------


def absolute_periods(t: SplittingTriple) -> LatticePair:
    """(Lambda1, Lambda2), each rescaled to area 1; v is forgotten."""
    return LatticePair(normalize_lattice(t.lambda1), normalize_lattice(t.lambda2))


def saddle_connections_csv_rows(conns) -> list[tuple]:
    return [(sc.length, float(sc.holonomy[0]), float(sc.holonomy[1]), len(sc.path)) for sc in conns]
