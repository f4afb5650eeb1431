"""Coset tables of Gamma0(m), Schreier graphs, origami orbits, Cheeger constants and spectral gaps.

Graph convention: every generator g contributes, at each vertex x, one undirected
edge x -- g(x).  In the adjacency matrix this adds 1 to A[x, g(x)] and 1 to
A[g(x), x], so a fixed point becomes a loop worth 2 and every vertex of a
two-generator Schreier graph has degree 4.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .prototypes import gamma0_index, veech_index

EXACT_CHEEGER_MAX = 22
DENSE_EIG_MAX = 2000
DEFAULT_ORBIT_CAP = 200_000


class OrbitTooLarge(RuntimeError):
    """Origami orbit exceeded the configured size cap."""


# ----- projective line over Z/m ---------------------------------------------


def _units(m: int) -> list[int]:
    return [u for u in range(1, m + 1) if math.gcd(u, m) == 1] if m > 1 else [0]


def canonical_point(c: int, d: int, m: int, units=None) -> tuple[int, int]:
    """Lexicographically least unit multiple of (c : d) in P^1(Z/m)."""
    if m == 1:
        return (0, 0)
    if units is None:
        units = _units(m)
    return min(((u * c) % m, (u * d) % m) for u in units)


@dataclass
class CosetTable:
    """Action of T = [[1,1],[0,1]] and L = [[1,0],[1,1]] on the bottom rows (c : d) of Gamma0(m) cosets."""

    m: int
    points: list
    action: dict  # generator name -> permutation as a list of indices

    @property
    def size(self) -> int:
        return len(self.points)


def gamma0_cosets(m: int) -> CosetTable:
    """Coset table of Gamma0(m) in SL2(Z), found by orbit search from (0 : 1)."""
    if not isinstance(m, int) or m < 1:
        raise ValueError("m must be a positive integer")
    units = _units(m)

    def T(p):
        c, d = p
        return canonical_point(c, c + d, m, units)

    def L(p):
        c, d = p
        return canonical_point(c + d, d, m, units)

    start = canonical_point(0, 1, m, units)
    seen = {start}
    queue = deque([start])
    while queue:
        p = queue.popleft()
        for g in (T, L):
            q = g(p)
            if q not in seen:
                seen.add(q)
                queue.append(q)
    points = sorted(seen)
    index = {p: i for i, p in enumerate(points)}
    action = {name: [index[g(p)] for p in points] for name, g in (("T", T), ("L", L))}
    return CosetTable(m, points, action)


def projective_line(m: int) -> list[tuple[int, int]]:
    """Direct enumeration of P^1(Z/m): canonical forms of all (c, d) with gcd(c, d, m) = 1."""
    units = _units(m)
    out = set()
    for c in range(m):
        for d in range(m):
            if math.gcd(math.gcd(c, d), m) == 1:
                out.add(canonical_point(c, d, m, units))
    return sorted(out)


# ----- graphs ----------------------------------------------------------------


@dataclass
class SchreierGraph:
    n: int
    edges: list  # (x, y, label), one per generator and vertex
    labels: list = field(default_factory=list)  # vertex labels, optional

    def adjacency(self) -> np.ndarray:
        A = np.zeros((self.n, self.n), dtype=np.int64)
        for x, y, _ in self.edges:
            A[x, y] += 1
            A[y, x] += 1
        return A

    def adjacency_sparse(self) -> sp.csr_matrix:
        rows = [x for x, y, _ in self.edges] + [y for x, y, _ in self.edges]
        cols = [y for x, y, _ in self.edges] + [x for x, y, _ in self.edges]
        return sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(self.n, self.n))

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=np.int64)
        for x, y, _ in self.edges:
            deg[x] += 1
            deg[y] += 1
        return deg

    def is_connected(self) -> bool:
        if self.n == 0:
            return False
        nbrs = [[] for _ in range(self.n)]
        for x, y, _ in self.edges:
            nbrs[x].append(y)
            nbrs[y].append(x)
        seen = {0}
        queue = deque([0])
        while queue:
            x = queue.popleft()
            for y in nbrs[x]:
                if y not in seen:
                    seen.add(y)
                    queue.append(y)
        return len(seen) == self.n

    def to_text(self) -> str:
        """Adjacency list: one line per vertex, 'x: y1 y2 ...' with multiplicity."""
        A = self.adjacency()
        lines = []
        for x in range(self.n):
            nb = []
            for y in range(self.n):
                nb.extend([str(y)] * int(A[x, y]))
            lines.append(f"{x}: {' '.join(nb)}")
        return "\n".join(lines) + "\n"


def graph_from_edges(n: int, edges) -> SchreierGraph:
    """A general undirected multigraph, for tests and small examples."""
    return SchreierGraph(n, [(x, y, "") for x, y in edges])


def schreier_graph(table: CosetTable) -> SchreierGraph:
    edges = []
    for name in sorted(table.action):
        perm = table.action[name]
        edges.extend((x, perm[x], name) for x in range(table.size))
    g = SchreierGraph(table.size, edges, list(table.points))
    if not g.is_connected():
        raise RuntimeError("Schreier graph is disconnected; the generators should generate SL2(Z)")
    return g


def _as_adjacency(g) -> np.ndarray:
    if isinstance(g, SchreierGraph):
        return g.adjacency()
    return np.asarray(g)


def cheeger_exact(g) -> Fraction:
    """min over bipartitions of |E(A, B)| / min(|A|, |B|), by exhaustive enumeration."""
    A = _as_adjacency(g)
    n = A.shape[0]
    if not 2 <= n <= EXACT_CHEEGER_MAX:
        raise ValueError(f"exhaustive Cheeger needs 2 <= |V| <= {EXACT_CHEEGER_MAX}; use cheeger_bound")
    # vertex n-1 always on the B side: masks over the first n-1 vertices, excluding the empty set
    masks = np.arange(1, 1 << (n - 1), dtype=np.int64)
    cut = np.zeros(masks.shape, dtype=np.int64)
    for x in range(n):
        for y in range(x + 1, n):
            w = int(A[x, y])
            if w:
                bx = (masks >> x) & 1
                by = (masks >> y) & 1 if y < n - 1 else 0
                cut += w * (bx ^ by)
    size = np.bitwise_count(masks).astype(np.int64)
    small = np.minimum(size, n - size)
    ratio = cut / small
    best = ratio.min()
    near = np.nonzero(ratio <= best * (1 + 1e-9) + 1e-15)[0]
    return min(Fraction(int(cut[i]), int(small[i])) for i in near)


def _normalized_laplacian(A: np.ndarray) -> np.ndarray:
    deg = A.sum(axis=1).astype(float)
    inv = 1.0 / np.sqrt(deg)
    return np.eye(A.shape[0]) - (A * inv[:, None]) * inv[None, :]


def _fiedler(g) -> tuple[float, np.ndarray]:
    """Second smallest eigenvalue of the normalized Laplacian and its eigenvector."""
    if isinstance(g, SchreierGraph) and g.n > DENSE_EIG_MAX:
        A = g.adjacency_sparse()
        deg = np.asarray(A.sum(axis=1)).ravel()
        inv = sp.diags(1.0 / np.sqrt(deg))
        B = sp.identity(g.n) + inv @ A @ inv  # 2I - L, top two eigenvalues are 2 and 2 - lambda1
        vals, vecs = spla.eigsh(B, k=2, which="LA", tol=1e-12)
        order = np.argsort(vals)[::-1]
        return float(2.0 - vals[order[1]]), vecs[:, order[1]]
    A = _as_adjacency(g).astype(float)
    vals, vecs = np.linalg.eigh(_normalized_laplacian(A))
    return float(vals[1]), vecs[:, 1]


def spectral_gap(g) -> float:
    """Smallest nonzero eigenvalue of the normalized Laplacian I - D^-1/2 A D^-1/2."""
    n = g.n if isinstance(g, SchreierGraph) else np.asarray(g).shape[0]
    if n < 2:
        raise ValueError("spectral gap needs at least two vertices")
    return _fiedler(g)[0]


def cheeger_bound(g) -> tuple[float, float]:
    """(lower, upper) around the Cheeger constant.

    lower = d_min lambda1 / 2, from the conductance bound lambda1 <= 2 phi and
    vol(S) >= d_min |S|; upper = best sweep cut of the Fiedler vector.
    """
    if isinstance(g, SchreierGraph):
        n, deg = g.n, g.degrees()
        nbrs = [[] for _ in range(n)]
        for x, y, _ in g.edges:
            if x != y:
                nbrs[x].append(y)
                nbrs[y].append(x)
    else:
        A = _as_adjacency(g)
        n, deg = A.shape[0], A.sum(axis=1)
        nbrs = [[y for y in range(n) if y != x for _ in range(int(A[x, y]))] for x in range(n)]
    if n < 2:
        raise ValueError("Cheeger bounds need at least two vertices")
    lam, vec = _fiedler(g)
    lower = float(deg.min()) * lam / 2
    order = np.argsort(vec / np.sqrt(deg), kind="stable")
    inside = np.zeros(n, dtype=bool)
    cut, best = 0, math.inf
    for count, x in enumerate(order[:-1], start=1):
        for y in nbrs[x]:
            cut += -1 if inside[y] else 1
        inside[x] = True
        best = min(best, cut / min(count, n - count))
    return lower, float(best)


# ----- origamis ---------------------------------------------------------------


def _inverse(p: tuple) -> tuple:
    inv = [0] * len(p)
    for i, j in enumerate(p):
        inv[j] = i
    return tuple(inv)


def _then(p: tuple, q: tuple) -> tuple:
    """Apply p first, then q."""
    return tuple(q[i] for i in p)


@dataclass(frozen=True)
class Origami:
    """Squares 0..n-1; sigma_h[i] is the right neighbour of i, sigma_v[i] the one above."""

    sigma_h: tuple
    sigma_v: tuple

    @property
    def n_squares(self) -> int:
        return len(self.sigma_h)

    def is_transitive(self) -> bool:
        seen, stack = {0}, [0]
        while stack:
            i = stack.pop()
            for j in (self.sigma_h[i], self.sigma_v[i]):
                if j not in seen:
                    seen.add(j)
                    stack.append(j)
        return len(seen) == self.n_squares

    def commutator(self) -> tuple:
        """Going right, up, left, down around a corner."""
        h, v = self.sigma_h, self.sigma_v
        return _then(_then(_then(h, v), _inverse(h)), _inverse(v))

    def cone_angles(self) -> list[int]:
        """Corner cycle lengths; a cycle of length k is a point of angle 2 pi k."""
        return sorted(_cycle_lengths(self.commutator()))

    def genus(self) -> int:
        vertices = len(self.cone_angles())
        chi = vertices - 2 * self.n_squares + self.n_squares
        return (2 - chi) // 2

    def canonical(self) -> tuple:
        """Relabelling-invariant form: least BFS relabelling over all starting squares."""
        n = self.n_squares
        best = None
        for start in range(n):
            label = {start: 0}
            order = [start]
            for i in order:
                for j in (self.sigma_h[i], self.sigma_v[i]):
                    if j not in label:
                        label[j] = len(order)
                        order.append(j)
            form = tuple(label[self.sigma_h[i]] for i in order) + tuple(label[self.sigma_v[i]] for i in order)
            if best is None or form < best:
                best = form
        return best

    def cycle_notation(self) -> tuple[str, str]:
        return _cycles_text(self.sigma_h), _cycles_text(self.sigma_v)


def _cycle_lengths(p: tuple) -> list[int]:
    seen, out = set(), []
    for i in range(len(p)):
        if i in seen:
            continue
        k, j = 0, i
        while j not in seen:
            seen.add(j)
            j = p[j]
            k += 1
        out.append(k)
    return out


def _cycles_text(p: tuple) -> str:
    """Cycle notation with squares numbered from 1."""
    seen, parts = set(), []
    for i in range(len(p)):
        if i in seen:
            continue
        cyc, j = [], i
        while j not in seen:
            seen.add(j)
            cyc.append(str(j + 1))
            j = p[j]
        parts.append("(" + " ".join(cyc) + ")")
    return "".join(parts)


def lshape_origami(d: int) -> Origami:
    """Unit-square tiling of the L-shaped table P(1 + d/2, d/2), d squares.

    Labels (from 1): the bottom row is 1 .. 1 + d/2 left to right; squares
    2 + d/2 .. d are stacked above square 1.
    """
    if not isinstance(d, int) or d < 4 or d % 2:
        raise ValueError("d must be an even integer >= 4")
    w = d // 2 + 1
    h = list(range(d))
    v = list(range(d))
    for i in range(w):
        h[i] = (i + 1) % w
    column = [0] + list(range(w, d))
    for a, b in zip(column, column[1:] + column[:1]):
        v[a] = b
    o = Origami(tuple(h), tuple(v))
    if not o.is_transitive():
        raise RuntimeError("L-shaped origami is not connected")
    return o


def origami_T(o: Origami) -> Origami:
    """Shear [[1,1],[0,1]]: the square above i becomes the left neighbour of the old one."""
    return Origami(o.sigma_h, _then(o.sigma_v, _inverse(o.sigma_h)))


def origami_L(o: Origami) -> Origami:
    """Shear [[1,0],[1,1]]: the right neighbour of i becomes the square below the old one."""
    return Origami(_then(o.sigma_h, _inverse(o.sigma_v)), o.sigma_v)


@dataclass
class OrigamiOrbit:
    graph: SchreierGraph
    representatives: list  # Origami per vertex


def origami_orbit(o: Origami, cap: int = DEFAULT_ORBIT_CAP) -> OrigamiOrbit:
    """SL2(Z)-orbit of o up to relabelling, as a Schreier graph for the generators T and L."""
    if not o.is_transitive():
        raise ValueError("origami is not connected")
    start = o.canonical()
    index = {start: 0}
    reps = [o]
    moves: list[tuple[int, int]] = []
    i = 0
    while i < len(reps):
        cur = reps[i]
        targets = []
        for g in (origami_T, origami_L):
            nxt = g(cur)
            key = nxt.canonical()
            if key not in index:
                if len(reps) >= cap:
                    raise OrbitTooLarge(f"origami orbit exceeds {cap} elements")
                index[key] = len(reps)
                reps.append(nxt)
            targets.append(index[key])
        moves.append(tuple(targets))
        i += 1
    edges = [(x, moves[x][0], "T") for x in range(len(reps))] + [(x, moves[x][1], "L") for x in range(len(reps))]
    return OrigamiOrbit(SchreierGraph(len(reps), edges), reps)


# ----- the expansion probe --------------------------------------------------

PROBE_COLUMNS = ["d", "D", "model", "index", "h_lower", "h_upper", "lambda1", "lambda1_D6"]


def probe_row(d: int, model: str = "gamma0", cap: int = DEFAULT_ORBIT_CAP) -> dict:
    """One expansion-probe row; h is exact (both bounds equal) when the graph is small."""
    if d < 4 or d % 2:
        raise ValueError("d must be even and >= 4")
    D = d * d
    if model == "gamma0":
        g = schreier_graph(gamma0_cosets(D // 4))
        index = gamma0_index(D // 4)
    elif model == "origami":
        g = origami_orbit(lshape_origami(d), cap).graph
        index = g.n
    else:
        raise ValueError(f"unknown model {model!r}")
    if not g.is_connected():
        raise RuntimeError("probe graph is disconnected")
    if g.n >= 2:
        lam = spectral_gap(g)
        lower, upper = cheeger_bound(g)
        if g.n <= EXACT_CHEEGER_MAX:
            h = float(cheeger_exact(g))
            if not lower - 1e-9 <= h <= upper + 1e-9:
                raise ArithmeticError("exact Cheeger constant falls outside its bounds")
            lower = upper = h
            if h < 1 / g.n:
                raise ArithmeticError("Cheeger constant below 1/|V| on a connected graph")
    else:
        lam, lower, upper = 0.0, 0.0, 0.0
    if lam > 2 * upper + 1e-9:
        raise ArithmeticError("lambda1 exceeds twice the Cheeger upper bound")
    return {
        "d": d,
        "D": D,
        "model": model,
        "index": index,
        "h_lower": lower,
        "h_upper": upper,
        "lambda1": lam,
        "lambda1_D6": lam * float(D) ** 6,
    }


def expansion_probe(d_list, model: str = "gamma0", cap: int = DEFAULT_ORBIT_CAP) -> list[dict]:
    return [probe_row(d, model, cap) for d in sorted(d_list)]


def origami_orbit_vs_formula(d: int, cap: int = DEFAULT_ORBIT_CAP) -> tuple[int, Fraction]:
    """Computed orbit size of the L-shaped origami next to the printed index formula."""
    return origami_orbit(lshape_origami(d), cap).graph.n, veech_index(d)
