"""Seeded random lattices, pairs, splittings and surfaces."""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from .lattice import LatticeBasis, LatticePair, Mat2

DEFAULT_YMAX = 20.0


def rng_for(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for a (seed, key...) cell; stable under any worker split."""
    return np.random.default_rng(np.random.SeedSequence([int(seed) & (2**64 - 1), *key]))


def _fundamental_point(rng: np.random.Generator, ymax: float) -> tuple[float, float]:
    """tau = x + iy in the standard fundamental domain with density proportional to dx dy / y^2 (y <= ymax)."""
    while True:
        x = rng.uniform(-0.5, 0.5)
        # y has density 1/y^2 on [sqrt3/2, ymax]: invert its distribution function
        y0 = math.sqrt(3) / 2
        u = rng.uniform()
        y = 1.0 / (1.0 / y0 - u * (1.0 / y0 - 1.0 / ymax))
        if x * x + y * y >= 1.0:
            return x, y


def haar_matrices(rng: np.random.Generator, n: int, ymax: float = DEFAULT_YMAX) -> np.ndarray:
    """n bases k_theta [[1/sqrt y, x/sqrt y], [0, sqrt y]] with tau = x + iy from the truncated Haar law.

    The basis ratio e2/e1 is tau, so the lattice up to rotation is the point tau of the
    modular surface; theta is uniform.
    """
    y0 = math.sqrt(3) / 2
    xs, ys = np.empty(0), np.empty(0)
    while xs.size < n:
        m = 2 * (n - xs.size) + 16
        x = rng.uniform(-0.5, 0.5, m)
        y = 1.0 / (1.0 / y0 - rng.uniform(size=m) * (1.0 / y0 - 1.0 / ymax))
        keep = x * x + y * y >= 1.0
        xs, ys = np.concatenate([xs, x[keep]]), np.concatenate([ys, y[keep]])
    xs, ys = xs[:n], ys[:n]
    th = rng.uniform(0, 2 * math.pi, n)
    c, sn, r = np.cos(th), np.sin(th), np.sqrt(ys)
    out = np.empty((n, 2, 2))
    out[:, 0, 0] = c / r
    out[:, 0, 1] = c * xs / r - sn * r
    out[:, 1, 0] = sn / r
    out[:, 1, 1] = sn * xs / r + c * r
    return out


def _basis(x: float, y: float, theta: float) -> np.ndarray:
    s = math.sqrt(y)
    c, sn = math.cos(theta), math.sin(theta)
    k = np.array([[c, -sn], [sn, c]])
    return k @ np.array([[1 / s, x / s], [0.0, s]])


def random_unimodular_matrix(rng: np.random.Generator, ymax: float = DEFAULT_YMAX, denom: int = 10**6) -> Mat2:
    """A truncated-Haar lattice basis rounded into SL2(Q), the last entry solved so that det = 1 exactly."""
    while True:
        x, y = _fundamental_point(rng, ymax)
        (a, b), (c, _) = _basis(x, y, rng.uniform(0, 2 * math.pi))
        A = Fraction(round(a * denom), denom)
        if A == 0:
            continue
        B = Fraction(round(b * denom), denom)
        C = Fraction(round(c * denom), denom)
        return Mat2(A, B, C, (1 + B * C) / A)


def random_unimodular_lattice(rng, ymax: float = DEFAULT_YMAX) -> LatticeBasis:
    return LatticeBasis.from_matrix(random_unimodular_matrix(rng, ymax))


def random_pair(rng, ymax: float = DEFAULT_YMAX) -> LatticePair:
    return LatticePair(random_unimodular_lattice(rng, ymax), random_unimodular_lattice(rng, ymax))


def seeded_pairs(seed: int, n: int, ymax: float = DEFAULT_YMAX) -> list[LatticePair]:
    return [random_pair(rng_for(seed, i), ymax) for i in range(n)]


def random_interval(rng, span: float = 4.0, denom: int = 1000) -> tuple[Fraction, Fraction]:
    a = Fraction(int(rng.integers(-span * denom, span * denom)), denom)
    length = Fraction(int(rng.integers(1, span * denom)), denom)
    return a, a + length
