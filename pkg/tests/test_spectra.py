import itertools
import random
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from h2lab.prototypes import gamma0_index, veech_index
from h2lab.spectra import (
    EXACT_CHEEGER_MAX,
    PROBE_COLUMNS,
    Origami,
    OrbitTooLarge,
    SchreierGraph,
    cheeger_bound,
    cheeger_exact,
    expansion_probe,
    gamma0_cosets,
    graph_from_edges,
    lshape_origami,
    origami_orbit,
    origami_orbit_vs_formula,
    probe_row,
    projective_line,
    schreier_graph,
    spectral_gap,
)

K2 = graph_from_edges(2, [(0, 1)])
C4 = graph_from_edges(4, [(0, 1), (1, 2), (2, 3), (3, 0)])
K4 = graph_from_edges(4, list(itertools.combinations(range(4), 2)))


def _random_schreier(rng, n):
    """Two random permutations of n points, kept when the graph is connected."""
    while True:
        perms = [rng.sample(range(n), n) for _ in range(2)]
        g = SchreierGraph(n, [(x, p[x], str(i)) for i, p in enumerate(perms) for x in range(n)])
        if g.is_connected():
            return g


def _charpoly(M):
    """Faddeev-LeVerrier over the rationals: coefficients of det(xI - M), leading first."""
    n = len(M)
    coeffs = [Fraction(1)]
    Mk = [[Fraction(0)] * n for _ in range(n)]
    for k in range(1, n + 1):
        for i in range(n):
            Mk[i][i] += coeffs[-1]
        Mk = [[sum(M[i][l] * Mk[l][j] for l in range(n)) for j in range(n)] for i in range(n)]
        coeffs.append(-sum(Mk[i][i] for i in range(n)) / k)
    return coeffs


def _poly_divmod(a, b):
    a = list(a)
    q = []
    while len(a) >= len(b):
        c = a[0] / b[0]
        q.append(c)
        for i in range(len(b)):
            a[i] -= c * b[i]
        a.pop(0)
    while a and a[0] == 0:
        a.pop(0)
    return q, a


def _squarefree(p):
    """p / gcd(p, p'): the same roots, each simple."""
    n = len(p) - 1
    a, b = p, [c * (n - i) for i, c in enumerate(p[:-1])]
    while b:
        a, b = b, _poly_divmod(a, b)[1]
    return _poly_divmod(p, a)[0]


def _gap_from_charpoly(g):
    A = g.adjacency()
    deg = A.sum(axis=1)
    n = g.n
    # 4-regular: the normalized Laplacian is I - A/4, rational
    assert len(set(deg.tolist())) == 1
    d = int(deg[0])
    L = [[Fraction(int(i == j)) - Fraction(int(A[i, j]), d) for j in range(n)] for i in range(n)]
    # eigenvalues of a symmetric matrix: real, and simple once repeats are divided out
    sf = _squarefree(_charpoly(L))
    with mpmath.workdps(50):
        roots = sorted(float(mpmath.re(r)) for r in mpmath.polyroots([mpmath.mpf(c.numerator) / c.denominator for c in sf], maxsteps=200, extraprec=200))
    return roots[1]


def test_coset_table_examples():
    t = gamma0_cosets(1)
    assert t.size == 1
    t = gamma0_cosets(2)
    assert t.size == 3
    idx = {p: i for i, p in enumerate(t.points)}
    a, b, c = idx[(0, 1)], idx[(1, 0)], idx[(1, 1)]
    T, L = t.action["T"], t.action["L"]
    assert T[a] == a and T[b] == c and T[c] == b
    assert L[b] == b and L[a] == c and L[c] == a


@pytest.mark.parametrize("m", range(1, 101))
def test_coset_table_size_matches_index(m):
    t = gamma0_cosets(m)
    assert t.size == gamma0_index(m)
    assert sorted(t.points) == projective_line(m)
    for perm in t.action.values():
        assert sorted(perm) == list(range(t.size))


@pytest.mark.parametrize("m", [1, 2, 3, 4, 6, 12, 25, 36])
def test_schreier_graphs_are_connected_and_4_regular(m):
    g = schreier_graph(gamma0_cosets(m))
    assert g.n == gamma0_index(m)
    assert g.is_connected()
    assert set(g.degrees().tolist()) == {4}


def test_trivial_schreier_graph_has_two_loops():
    g = schreier_graph(gamma0_cosets(1))
    assert g.n == 1 and g.degrees().tolist() == [4]
    assert all(x == y == 0 for x, y, _ in g.edges) and len(g.edges) == 2


def test_cheeger_examples():
    assert cheeger_exact(K2) == 1
    assert cheeger_exact(C4) == 1
    assert cheeger_exact(K4) == 2
    assert cheeger_exact(schreier_graph(gamma0_cosets(2))) == 2
    with pytest.raises(ValueError):
        cheeger_exact(graph_from_edges(EXACT_CHEEGER_MAX + 1, [(i, i + 1) for i in range(EXACT_CHEEGER_MAX)]))


def test_spectral_gap_examples():
    assert spectral_gap(K2) == pytest.approx(2.0, abs=1e-12)
    assert spectral_gap(C4) == pytest.approx(1.0, abs=1e-12)
    # I - A/4 on the m = 2 graph has spectrum {0, 1/2, 3/2}
    assert spectral_gap(schreier_graph(gamma0_cosets(2))) == pytest.approx(0.5, abs=1e-12)
    with pytest.raises(ValueError):
        spectral_gap(graph_from_edges(1, []))


def test_bounds_bracket_k2():
    lo, hi = cheeger_bound(K2)
    assert lo <= 1 <= hi


@settings(max_examples=40)
@given(st.integers(2, 12), st.integers(0, 10**6))
def test_bounds_bracket_exact_cheeger(n, seed):
    g = _random_schreier(random.Random(seed), n)
    h = cheeger_exact(g)
    lo, hi = cheeger_bound(g)
    assert lo <= h + 1e-9 and h <= hi + 1e-9
    assert spectral_gap(g) <= 2 * h + 1e-9
    assert h >= Fraction(1, n)


@settings(max_examples=40)
@given(st.integers(2, 8), st.integers(0, 10**6))
def test_spectral_gap_matches_characteristic_polynomial(n, seed):
    g = _random_schreier(random.Random(seed), n)
    assert spectral_gap(g) == pytest.approx(_gap_from_charpoly(g), abs=1e-8)


def test_sparse_solver_agrees_with_dense():
    g = schreier_graph(gamma0_cosets(1200))  # 2880 vertices, above the dense threshold
    assert g.n > 2000
    dense = np.linalg.eigvalsh(np.eye(g.n) - g.adjacency() / 4.0)[1]
    assert spectral_gap(g) == pytest.approx(dense, abs=1e-8)


def test_lshape_origami_d4():
    o = lshape_origami(4)
    assert o.n_squares == 4
    assert o.cycle_notation() == ("(1 2 3)(4)", "(1 4)(2)(3)")
    assert o.genus() == 2 and o.is_transitive()
    with pytest.raises(ValueError):
        lshape_origami(5)


@pytest.mark.parametrize("d", range(4, 21, 2))
def test_lshape_origami_family(d):
    o = lshape_origami(d)
    assert o.is_transitive() and o.genus() == 2
    # one cone point of angle 6 pi, the rest regular
    assert o.cone_angles() == [1] * (o.n_squares - 3) + [3]


def test_origami_orbit_d4():
    orb = origami_orbit(lshape_origami(4))
    g = orb.graph
    assert g.n == 9
    assert g.is_connected() and set(g.degrees().tolist()) == {4}
    assert {o.n_squares for o in orb.representatives} == {4}
    assert len({o.canonical() for o in orb.representatives}) == g.n
    with pytest.raises(OrbitTooLarge):
        origami_orbit(lshape_origami(4), cap=3)


@pytest.mark.parametrize("d", range(4, 17, 2))
def test_orbit_size_matches_index_formula(d):
    size, formula = origami_orbit_vs_formula(d)
    assert formula == veech_index(d)
    assert size == formula


def test_canonical_form_ignores_relabelling():
    o = lshape_origami(6)
    n = o.n_squares
    perm = list(range(n))
    random.Random(1).shuffle(perm)
    inv = [0] * n
    for i, p in enumerate(perm):
        inv[p] = i
    # conjugate both permutations by perm
    h = tuple(perm[o.sigma_h[inv[i]]] for i in range(n))
    v = tuple(perm[o.sigma_v[inv[i]]] for i in range(n))
    assert Origami(h, v).canonical() == o.canonical()


def test_probe_row_d4():
    row = probe_row(4)
    assert list(row) == PROBE_COLUMNS
    assert row["index"] == 6 and row["D"] == 16
    assert row["h_lower"] == row["h_upper"] == pytest.approx(4 / 3)
    assert row["lambda1"] == pytest.approx(0.5)
    assert probe_row(4, "origami")["index"] == 9
    with pytest.raises(ValueError):
        probe_row(5)


def test_probe_contract():
    rows = expansion_probe([8, 4, 6, 12])
    assert [r["d"] for r in rows] == [4, 6, 8, 12]
    for r in rows:
        assert r["h_lower"] <= r["h_upper"] + 1e-12
        assert r["lambda1"] <= 2 * r["h_upper"] + 1e-9
        assert r["h_upper"] >= 1 / r["index"]
