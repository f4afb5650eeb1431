import math
import random
from fractions import Fraction

import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from h2lab.exactnum import QuadNum
from h2lab.lattice import LatticeBasis, Mat2, act
from h2lab.splitting import SplittingTriple, validate_splitting

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

small_fracs = st.fractions(min_value=-20, max_value=20, max_denominator=12)
nonzero_fracs = small_fracs.filter(lambda x: x != 0)


@st.composite
def quadnums(draw, k=5):
    return QuadNum(draw(small_fracs), draw(small_fracs), k)


@st.composite
def sl2_rational(draw):
    """Exact SL2(Q) matrices with modest entries."""
    a = draw(nonzero_fracs)
    b = draw(small_fracs)
    c = draw(small_fracs)
    return Mat2(a, b, c, (1 + b * c) / a)


_GENS = (Mat2(1, 1, 0, 1), Mat2(1, -1, 0, 1), Mat2(1, 0, 1, 1), Mat2(1, 0, -1, 1))


@st.composite
def sl2_integer(draw, length=6):
    """Words in the elementary shears and their inverses."""
    g = Mat2.identity()
    for i in draw(st.lists(st.integers(0, 3), max_size=length)):
        g = g @ _GENS[i]
    return g


def float_sl2(rng: random.Random) -> Mat2:
    while True:
        a, b, c = (rng.uniform(-2, 2) for _ in range(3))
        if abs(a) > 0.3:
            d = (1 + b * c) / a
            if abs(d) < 3:
                return Mat2(a, b, c, d)


def float_triple(rng: random.Random) -> SplittingTriple:
    """A valid float splitting triple of total area 1."""
    Z = LatticeBasis((1.0, 0.0), (0.0, 1.0))
    while True:
        share = rng.uniform(0.2, 0.8)
        L1 = act(float_sl2(rng), Z).scaled(math.sqrt(share))
        L2 = act(float_sl2(rng), Z).scaled(math.sqrt(1 - share))
        m, n = rng.randint(-3, 3), rng.randint(-3, 3)
        if math.gcd(m, n) != 1:
            continue
        t = SplittingTriple(L1, L2, L2.vector(m, n))
        if validate_splitting(t).valid:
            return t


def rational_triple(rng: random.Random) -> SplittingTriple:
    """A valid exact splitting triple over Q."""

    def basis():
        while True:
            e = [Fraction(rng.randint(-12, 12), rng.randint(1, 4)) for _ in range(4)]
            if e[0] * e[3] - e[1] * e[2] > Fraction(1, 2):
                return LatticeBasis((e[0], e[2]), (e[1], e[3]))

    while True:
        L1, L2 = basis(), basis()
        m, n = rng.randint(-2, 2), rng.randint(-2, 2)
        if math.gcd(m, n) != 1:
            continue
        t = SplittingTriple(L1, L2, L2.vector(m, n))
        rep = validate_splitting(t)
        if rep.valid and rep.primitive_in == "second":
            return t


def rational_sl2(rng: random.Random) -> Mat2:
    while True:
        a = Fraction(rng.randint(-8, 8), rng.randint(1, 4))
        if a == 0:
            continue
        b = Fraction(rng.randint(-8, 8), rng.randint(1, 4))
        c = Fraction(rng.randint(-8, 8), rng.randint(1, 4))
        return Mat2(a, b, c, (1 + b * c) / a)


@pytest.fixture
def pyrng():
    return random.Random(20240917)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
