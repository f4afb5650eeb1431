import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from h2lab.exactnum import QuadNum
from h2lab.prototypes import (
    EigenformPrototype,
    SplitPrototype,
    approx_ratio_prototype,
    discriminant_constraints,
    enumerate_eigenform_prototypes,
    enumerate_split_prototypes,
    gamma0_index,
    lshape_splitting,
    prototypical_pair,
    prototypical_splitting,
    rational_area_adjust,
    veech_index,
)
from h2lab.splitting import validate_splitting


def test_eigenform_examples():
    assert {(p.e, p.ell, p.m) for p in enumerate_eigenform_prototypes(8)} == {(0, 1, 2), (2, 1, 1), (-2, 1, 1)}
    assert {(p.e, p.ell, p.m) for p in enumerate_eigenform_prototypes(5)} == {(1, 1, 1), (-1, 1, 1)}
    with pytest.raises(ValueError):
        enumerate_eigenform_prototypes(6)


def test_split_examples():
    assert {(p.a, p.b, p.c, p.e) for p in enumerate_split_prototypes(8)} == {(0, 2, 1, 0), (0, 1, 1, -2)}
    assert {(p.a, p.b, p.c, p.e) for p in enumerate_split_prototypes(5)} == {(0, 1, 1, -1)}
    with pytest.raises(ValueError):
        enumerate_split_prototypes(7)


@pytest.mark.parametrize("D", [5, 8, 9, 12, 13, 17, 20, 24, 33, 100])
def test_split_prototypes_self_validate(D):
    for p in enumerate_split_prototypes(D):
        assert p.D == D
        assert 0 <= p.a < math.gcd(p.b, p.c) and p.c + p.e < p.b
        assert math.gcd(math.gcd(p.a, p.b), math.gcd(p.c, p.e)) == 1


def test_prototype_constructor_rejects_bad_data():
    with pytest.raises(ValueError):
        SplitPrototype(0, 1, 1, 0)  # c + e < b fails
    with pytest.raises(ValueError):
        EigenformPrototype(2, 2, 1)  # gcd(e, ell) = 2


def test_prototypical_pair_examples():
    P = prototypical_pair(EigenformPrototype(0, 1, 2))
    r2 = QuadNum(0, 1, 2)
    assert P.first.e1 == (2, 0) and P.first.e2 == (0, 1)
    assert P.second.e1 == (r2, 0) and P.second.e2 == (0, r2)
    assert (P.first.area, P.second.area) == (2, 2)
    P = prototypical_pair(EigenformPrototype(2, 1, 1))
    assert P.second.e1[0] == 1 + r2
    assert (P.first.area, P.second.area) == (1, 3 + 2 * r2)


@pytest.mark.parametrize("D", [4 * m for m in range(2, 12)])
def test_zero_e_gives_equal_areas(D):
    for p in enumerate_eigenform_prototypes(D):
        if p.e == 0:
            P = prototypical_pair(p)
            assert P.first.area == P.second.area


def test_prototypical_splitting_examples():
    t = prototypical_splitting(SplitPrototype(0, 2, 1, 0))
    r2 = QuadNum(0, 1, 2)
    assert t.lambda1.e1 == (2, 0) and t.lambda1.e2 == (0, 1)
    assert t.lambda2.e1[0] == r2 and t.v[0] == r2
    for D in range(5, 101):
        if D % 4 in (0, 1):
            for p in enumerate_split_prototypes(D):
                assert prototypical_splitting(p).lambda1.area == p.b * p.c


def test_lshape_examples():
    t = lshape_splitting(16)
    assert (t.lambda1.e1, t.lambda1.e2) == ((2, 0), (0, 1))
    assert (t.lambda2.e1, t.lambda2.e2) == ((1, 0), (0, 2))
    assert t.v == (1, 0)
    assert t.total_area() == 4
    for d in range(4, 61, 2):
        assert validate_splitting(lshape_splitting(d * d)).valid
    with pytest.raises(ValueError):
        lshape_splitting(25)


def _phi_oracle(n):
    return sum(1 for k in range(1, n + 1) if math.gcd(k, n) == 1)


def test_index_examples():
    assert gamma0_index(1) == 1
    assert gamma0_index(2) == 3
    assert gamma0_index(12) == 24
    assert veech_index(4) == 9
    assert veech_index(3) == 3
    with pytest.raises(ValueError):
        veech_index(2)


@given(st.integers(1, 120))
def test_gamma0_index_counts_projective_line(n):
    # points of P^1(Z/n): unimodular pairs mod n, up to units
    pairs = sum(1 for c in range(n) for d in range(n) if math.gcd(math.gcd(c, d), n) == 1)
    assert gamma0_index(n) == pairs // _phi_oracle(n)


def test_approx_ratio_examples():
    r = approx_ratio_prototype(1, 50)
    assert r.prototype.e == 0 and r.ratio == 1
    r = approx_ratio_prototype(2, 100)
    assert r.prototype.e == 7 and r.prototype.D == 449
    assert float(r.ratio) == pytest.approx(1.9866, abs=5e-5)
    assert r.area_ratio * r.ratio == 1


def test_approx_ratio_rate():
    bs = [10**k for k in range(2, 7)]
    devs = [approx_ratio_prototype(2, b).deviation for b in bs]
    slope = np.polyfit(np.log(bs), np.log(devs), 1)[0]
    assert 0.4 <= -slope <= 0.6


def test_rational_area_adjust_examples():
    a = rational_area_adjust(1, 0.1)
    assert (a.p, a.q, a.epsilon) == (1, 1, 0)
    a = rational_area_adjust(2, Fraction(1, 10))
    assert (a.p, a.q) == (3, 4)
    assert a.epsilon == QuadNum(-1, Fraction(3, 4), 2)
    assert float(a.epsilon) == pytest.approx(0.0607, abs=1e-4)


def _stern_brocot_oracle(k, eta0):
    # smallest q, then p, with 1 <= (p/q) sqrt k < 1 + eta0, decided in exact squares
    for q in range(1, 10**4):
        for p in range(1, 10**4):
            if p * p * k >= q * q:
                if Fraction(p * p * k, q * q) < (1 + eta0) ** 2:
                    return p, q
                break
    raise AssertionError("no approximation found")


@given(st.sampled_from([1, 2, 3, 5, 6, 7, 10, 11, 13]), st.fractions(Fraction(1, 50), Fraction(99, 100)))
def test_rational_area_adjust_property(k, eta0):
    a = rational_area_adjust(k, eta0)
    assert (a.p, a.q) == _stern_brocot_oracle(k, eta0)
    assert 0 <= a.epsilon < eta0
    # the search stays within the bound q < 2 sqrt(k) / eta0
    assert a.q < 2 * math.sqrt(k) / eta0 + 1


def test_discriminant_constraints_examples():
    rep = discriminant_constraints(1, 1, 1, 5)
    assert rep.branch == "D=m/4"
    assert [(c.e, c.ell) for c in rep.admissible] == [(0, 1)]
    rep = discriminant_constraints(3, 4, 2, 3)
    assert not rep.k_divides_m and rep.admissible == ()
    rep = discriminant_constraints(3, 4, 2, 4)
    assert rep.k_divides_m and rep.branch == "square"
    # every candidate carries the reason it failed; here none survive
    assert rep.admissible == ()
    assert len(rep.candidates) == sum(1 for ell in range(1, 13) if 12 % ell == 0)


def _naive_split(D):
    out = set()
    for a in range(D):
        for b in range(1, D):
            for c in range(1, D):
                for e in range(-D, D):
                    if e * e + 4 * b * c == D and 0 <= a < math.gcd(b, c) and c + e < b:
                        if math.gcd(math.gcd(a, b), math.gcd(c, e)) == 1:
                            out.add((a, b, c, e))
    return out


def _naive_eigen(D):
    return {
        (e, ell, m)
        for e in range(-D, D + 1)
        for ell in range(1, D)
        for m in range(1, D)
        if e * e + 4 * ell * ell * m == D and math.gcd(e, ell) == 1
    }


@pytest.mark.parametrize("D", [d for d in range(5, 41) if d % 4 in (0, 1)])
def test_enumeration_matches_naive_search(D):
    assert {(p.a, p.b, p.c, p.e) for p in enumerate_split_prototypes(D)} == _naive_split(D)
    assert {(p.e, p.ell, p.m) for p in enumerate_eigenform_prototypes(D)} == _naive_eigen(D)
