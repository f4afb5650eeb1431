"""Planar lattices, the GL2+(R) action, Lagrange-Gauss reduction and a metric proxy on X."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterator

import numpy as np

from .exactnum import QuadNum, exact_sqrt, from_text, is_exact, to_text

EQ_TOL = 1e-9

Vec = tuple


def dot(u: Vec, v: Vec):
    return u[0] * v[0] + u[1] * v[1]


def cross(u: Vec, v: Vec):
    return u[0] * v[1] - u[1] * v[0]


def norm_sq(u: Vec):
    return u[0] * u[0] + u[1] * u[1]


def vadd(u: Vec, v: Vec) -> Vec:
    return (u[0] + v[0], u[1] + v[1])


def vsub(u: Vec, v: Vec) -> Vec:
    return (u[0] - v[0], u[1] - v[1])


def vscale(s, u: Vec) -> Vec:
    return (s * u[0], s * u[1])


def div(a, b):
    """a / b that stays rational for integer operands."""
    if isinstance(a, int) and isinstance(b, int):
        return Fraction(a, b)
    return a / b


def vfloat(u: Vec) -> tuple[float, float]:
    return (float(u[0]), float(u[1]))


class Mat2:
    """2x2 matrix over exact or float scalars; acts on column vectors."""

    __slots__ = ("a", "b", "c", "d")

    def __init__(self, a, b, c, d):
        self.a, self.b, self.c, self.d = a, b, c, d

    @classmethod
    def from_columns(cls, u: Vec, v: Vec) -> Mat2:
        return cls(u[0], v[0], u[1], v[1])

    @classmethod
    def identity(cls) -> Mat2:
        return cls(1, 0, 0, 1)

    @property
    def det(self):
        return self.a * self.d - self.b * self.c

    @property
    def columns(self) -> tuple[Vec, Vec]:
        return (self.a, self.c), (self.b, self.d)

    def rows(self):
        return ((self.a, self.b), (self.c, self.d))

    def __matmul__(self, other):
        if isinstance(other, Mat2):
            return Mat2(
                self.a * other.a + self.b * other.c,
                self.a * other.b + self.b * other.d,
                self.c * other.a + self.d * other.c,
                self.c * other.b + self.d * other.d,
            )
        x, y = other
        return (self.a * x + self.b * y, self.c * x + self.d * y)

    def __mul__(self, s):
        return Mat2(self.a * s, self.b * s, self.c * s, self.d * s)

    __rmul__ = __mul__

    def inverse(self) -> Mat2:
        det = self.det
        if det == 0:
            raise ZeroDivisionError("singular matrix")
        if isinstance(det, int) and det in (1, -1):
            return Mat2(self.d * det, -self.b * det, -self.c * det, self.a * det)
        if isinstance(det, int):
            det = Fraction(det)
        return Mat2(self.d / det, -self.b / det, -self.c / det, self.a / det)

    def to_float(self) -> Mat2:
        return Mat2(float(self.a), float(self.b), float(self.c), float(self.d))

    def to_numpy(self) -> np.ndarray:
        return np.array([[float(self.a), float(self.b)], [float(self.c), float(self.d)]])

    def is_integral(self) -> bool:
        return all(isinstance(x, int) or (is_exact(x) and x == math.floor(x)) for x in self.entries())

    def entries(self):
        return (self.a, self.b, self.c, self.d)

    def __eq__(self, other):
        return isinstance(other, Mat2) and self.entries() == other.entries()

    def __hash__(self):
        return hash(self.entries())

    def __repr__(self):
        return f"Mat2([[{self.a}, {self.b}], [{self.c}, {self.d}]])"


def a_t(t: float) -> Mat2:
    return Mat2(math.exp(t / 2), 0.0, 0.0, math.exp(-t / 2))


def u_r(r) -> Mat2:
    return Mat2(1, r, 0, 1)


def rotation(theta: float) -> Mat2:
    c, s = math.cos(theta), math.sin(theta)
    return Mat2(c, -s, s, c)


@dataclass(frozen=True)
class LatticeBasis:
    """Lattice Z e1 + Z e2 in R^2."""

    e1: Vec
    e2: Vec

    def __post_init__(self):
        if self.det == 0:
            raise ValueError("degenerate lattice basis")

    @classmethod
    def from_matrix(cls, m: Mat2) -> LatticeBasis:
        u, v = m.columns
        return cls(u, v)

    @classmethod
    def standard(cls) -> LatticeBasis:
        return cls((1, 0), (0, 1))

    @property
    def matrix(self) -> Mat2:
        return Mat2.from_columns(self.e1, self.e2)

    @property
    def det(self):
        return cross(self.e1, self.e2)

    @property
    def area(self):
        d = self.det
        return -d if d < 0 else d

    @property
    def exact(self) -> bool:
        return all(is_exact(x) for x in (*self.e1, *self.e2))

    def vector(self, m: int, n: int) -> Vec:
        return (m * self.e1[0] + n * self.e2[0], m * self.e1[1] + n * self.e2[1])

    def coordinates(self, w: Vec) -> Vec:
        """Real coordinates of w in the basis."""
        d = self.det
        return (div(cross(w, self.e2), d), div(cross(self.e1, w), d))

    def to_float(self) -> LatticeBasis:
        return LatticeBasis(vfloat(self.e1), vfloat(self.e2))

    def scaled(self, s) -> LatticeBasis:
        return LatticeBasis(vscale(s, self.e1), vscale(s, self.e2))

    def oriented(self) -> LatticeBasis:
        """Same lattice with a positively oriented basis."""
        if self.det < 0:
            return LatticeBasis(self.e1, vscale(-1, self.e2))
        return self


@dataclass(frozen=True)
class LatticePair:
    first: LatticeBasis
    second: LatticeBasis

    def __iter__(self):
        return iter((self.first, self.second))

    def normalized(self) -> LatticePair:
        return LatticePair(normalize_lattice(self.first), normalize_lattice(self.second))

    def systole(self) -> float:
        return min(float(systole_lattice(self.first)), float(systole_lattice(self.second)))


def _round(x) -> int:
    if isinstance(x, float):
        return math.floor(x + 0.5)
    return math.floor(x + Fraction(1, 2))


def gauss_reduce(e1: Vec, e2: Vec) -> tuple[Vec, Vec, Mat2]:
    """Lagrange-Gauss reduction keeping orientation.

    Returns (f1, f2, gamma) with [f1 f2] = [e1 e2] gamma, gamma in GL2(Z) of
    determinant +1, |f1| <= |f2| and |<f1, f2>| <= |f1|^2 / 2.
    """
    if cross(e1, e2) == 0:
        raise ValueError("degenerate lattice basis")
    g = [[1, 0], [0, 1]]  # columns track coefficients of f1, f2
    f1, f2 = e1, e2
    if norm_sq(f2) < norm_sq(f1):
        f1, f2 = f2, vscale(-1, f1)
        g = [[g[0][1], -g[0][0]], [g[1][1], -g[1][0]]]
    for _ in range(10_000):
        n1 = norm_sq(f1)
        mu = _round(div(dot(f1, f2), n1))
        if mu:
            f2 = vsub(f2, vscale(mu, f1))
            g = [[g[0][0], g[0][1] - mu * g[0][0]], [g[1][0], g[1][1] - mu * g[1][0]]]
        if norm_sq(f2) < n1:
            f1, f2 = f2, vscale(-1, f1)
            g = [[g[0][1], -g[0][0]], [g[1][1], -g[1][0]]]
        else:
            return f1, f2, Mat2(g[0][0], g[0][1], g[1][0], g[1][1])
    raise RuntimeError("Gauss reduction did not terminate")


def reduce_basis(L: LatticeBasis) -> LatticeBasis:
    f1, f2, _ = gauss_reduce(L.e1, L.e2)
    return LatticeBasis(f1, f2)


def systole_sq(L: LatticeBasis):
    f1, _, _ = gauss_reduce(L.e1, L.e2)
    return norm_sq(f1)


def systole_lattice(L: LatticeBasis):
    """Length of a shortest nonzero vector; exact when the squared length is rational."""
    return exact_sqrt(systole_sq(L))


def act(g: Mat2, L):
    """Apply g in GL2+(R) to a lattice or (diagonally) to a pair."""
    if not g.det > 0:
        raise ValueError("act needs det(g) > 0")
    if isinstance(L, LatticePair):
        return LatticePair(act(g, L.first), act(g, L.second))
    return LatticeBasis(g @ L.e1, g @ L.e2)


def normalize_lattice(L: LatticeBasis) -> LatticeBasis:
    """Rescale to area 1, exactly when the square root stays in the basis field."""
    s = exact_sqrt(L.area)
    if isinstance(s, QuadNum):
        if s.is_rational:
            return L.scaled(1 / s.a)
        if all(_compatible(x, s) for x in (*L.e1, *L.e2)):
            return L.scaled(1 / s)
        s = float(s)
    return L.to_float().scaled(1 / s)


def _compatible(x, s: QuadNum) -> bool:
    if isinstance(x, (int, Fraction)):
        return True
    if isinstance(x, QuadNum):
        return x.k in (1, s.k)
    return False


def same_lattice(L1: LatticeBasis, L2: LatticeBasis, tol: float = EQ_TOL) -> bool:
    """Equality of the lattices spanned (exact when both bases are exact)."""
    exact = L1.exact and L2.exact
    for w in (L2.e1, L2.e2):
        x, y = L1.coordinates(w)
        for c in (x, y):
            if exact:
                if c != math.floor(c):
                    return False
            elif abs(float(c) - round(float(c))) > tol:
                return False
    if exact:
        return L1.area == L2.area
    return abs(float(L1.area) - float(L2.area)) <= tol * max(1.0, float(L1.area))


def lattice_points(L: LatticeBasis, radius) -> Iterator[tuple[int, int, Vec]]:
    """All (m, n, m e1 + n e2) with Euclidean length <= radius (excluding nothing)."""
    f1, f2, g = gauss_reduce(L.e1, L.e2)
    # |m f1 + n f2|^2 >= (3/4) max(|m|,|n|)^2 |f1|^2 for a reduced basis
    n1 = float(norm_sq(f1))
    bound = int(float(radius) / math.sqrt(0.75 * n1)) + 1
    r2 = radius * radius
    for m in range(-bound, bound + 1):
        for n in range(-bound, bound + 1):
            w = (m * f1[0] + n * f2[0], m * f1[1] + n * f2[1])
            if norm_sq(w) <= r2:
                # coefficients in the original basis
                yield m * g.a + n * g.b, m * g.c + n * g.d, w


def fundamental_domain_reduce(g: Mat2) -> tuple[Mat2, Mat2]:
    """Return (g0, gamma) with g = g0 gamma, gamma in SL2(Z), g0 Z^2 Gauss-reduced."""
    u, v = g.columns
    f1, f2, gam = gauss_reduce(u, v)
    return Mat2.from_columns(f1, f2), gam.inverse()


# ----- metric proxy on X ---------------------------------------------------


@lru_cache(maxsize=8)
def _sl2z_ball(bound: int) -> np.ndarray:
    r = np.arange(-bound, bound + 1)
    a, b, c, d = np.meshgrid(r, r, r, r, indexing="ij")
    keep = a * d - b * c == 1
    return np.stack([a[keep], b[keep], c[keep], d[keep]], axis=1).reshape(-1, 2, 2).astype(float)


def _factor_distance(gp: np.ndarray, gq: np.ndarray, bound: int) -> tuple[float, bool]:
    gammas = _sl2z_ball(bound)
    h = gq @ gammas @ np.linalg.inv(gp)
    hinv = gp @ np.linalg.inv(gammas) @ np.linalg.inv(gq)
    eye = np.eye(2)
    vals = np.maximum(np.abs(h - eye).max(axis=(1, 2)), np.abs(hinv - eye).max(axis=(1, 2)))
    i = int(np.argmin(vals))
    at_bound = bool(np.abs(gammas[i]).max() >= bound)
    return float(vals[i]), at_bound


def _check_unimodular(L: LatticeBasis) -> None:
    if abs(float(L.area) - 1.0) > 1e-9:
        raise ValueError(f"dist_X needs area-normalized lattices, got area {float(L.area)}")


def _reduced_matrix(L: LatticeBasis) -> np.ndarray:
    Lf = L.to_float().oriented()
    f1, f2, _ = gauss_reduce(Lf.e1, Lf.e2)
    return Mat2.from_columns(f1, f2).to_numpy()


def dist_X_report(P: LatticePair, Q: LatticePair, search_bound: int = 10) -> tuple[float, bool]:
    """Distance proxy and a flag telling whether the minimizing gamma touched the search bound."""
    worst, flagged = 0.0, False
    for lp, lq in zip(P, Q):
        _check_unimodular(lp)
        _check_unimodular(lq)
        d, hit = _factor_distance(_reduced_matrix(lp), _reduced_matrix(lq), search_bound)
        worst = max(worst, d)
        flagged = flagged or hit
    return worst, flagged


def dist_X(P: LatticePair, Q: LatticePair, search_bound: int = 10) -> float:
    """max over factors of min_gamma max(|h - I|, |h^-1 - I|), h = g_Q gamma g_P^-1, entrywise norm."""
    return dist_X_report(P, Q, search_bound)[0]


def reduced_matrices(mats: np.ndarray) -> np.ndarray:
    """Vectorized Gauss reduction of a stack of 2x2 bases (columns are generators)."""
    e1 = mats[:, :, 0].copy()
    e2 = mats[:, :, 1].copy()
    for _ in range(200):
        n1 = (e1 * e1).sum(axis=1)
        mu = np.floor((e1 * e2).sum(axis=1) / n1 + 0.5)
        e2 = e2 - mu[:, None] * e1
        n2 = (e2 * e2).sum(axis=1)
        swap = n2 < n1
        if not swap.any():
            break
        e1s = e1[swap].copy()
        e1[swap] = e2[swap]
        e2[swap] = -e1s
    return np.stack([e1, e2], axis=2)


def dist_X_batch(P_mats: np.ndarray, Q: LatticePair, window: int = 1) -> np.ndarray:
    """Distance proxy from many pairs (array n x 2 x 2 x 2) to one target pair.

    gamma is searched within `window` of g_Q^-1 g_P entrywise, which contains
    the minimizer whenever the distance is small; used by the density sweeps.
    """
    out = np.zeros(P_mats.shape[0])
    offs = np.arange(-window, window + 1)
    grid = np.stack(np.meshgrid(offs, offs, offs, offs, indexing="ij"), axis=-1).reshape(-1, 2, 2)
    eye = np.eye(2)
    for f, lq in enumerate(Q):
        _check_unimodular(lq)
        gq = _reduced_matrix(lq)
        gp = reduced_matrices(P_mats[:, f])
        base = np.rint(np.linalg.inv(gq) @ gp)
        gam = base[:, None] + grid[None]
        det = gam[..., 0, 0] * gam[..., 1, 1] - gam[..., 0, 1] * gam[..., 1, 0]
        h = gq @ gam @ np.linalg.inv(gp)[:, None]
        hinv = gp[:, None] @ np.linalg.inv(np.where((det == 1)[..., None, None], gam, eye)) @ np.linalg.inv(gq)
        vals = np.maximum(np.abs(h - eye).max(axis=(-1, -2)), np.abs(hinv - eye).max(axis=(-1, -2)))
        vals = np.where(det == 1, vals, np.inf)
        out = np.maximum(out, vals.min(axis=1))
    return out


# ----- serialization -------------------------------------------------------


def _scalar_json(x):
    return to_text(x) if is_exact(x) else float(x)


def _scalar_from_json(x):
    return from_text(x) if isinstance(x, str) else float(x)


def basis_to_json(L: LatticeBasis) -> list:
    m = L.matrix
    return [[_scalar_json(m.a), _scalar_json(m.b)], [_scalar_json(m.c), _scalar_json(m.d)]]


def basis_from_json(rows: list) -> LatticeBasis:
    (a, b), (c, d) = rows
    return LatticeBasis.from_matrix(Mat2(*(_scalar_from_json(x) for x in (a, b, c, d))))
