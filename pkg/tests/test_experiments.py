import math

import numpy as np
import pytest

from h2lab import experiments as ex
from h2lab.lattice import LatticeBasis, LatticePair, dist_X
from h2lab.sampling import haar_matrices, rng_for, seeded_pairs

# Haar means of the factor bumps, from the first quadrature run
BULK_REFERENCE = 0.1266979066
HIGH_REFERENCE = 0.0782822416


def _grid_haar_integral(bump, n=1500):
    """Midpoint rule for (3/pi) dx dy / y^2 over the bump's box intersected with the fundamental domain."""
    xs = bump.x0 - bump.rx + (np.arange(n) + 0.5) * (2 * bump.rx / n)
    ys = bump.y0 - bump.ry + (np.arange(n) + 0.5) * (2 * bump.ry / n)
    X, Y = np.meshgrid(xs, ys)
    inside = (np.abs(X) <= 0.5) & (X * X + Y * Y >= 1)
    vals = np.where(inside, bump(X + 1j * Y) / (Y * Y), 0.0)
    return 3 / math.pi * vals.sum() * (2 * bump.rx / n) * (2 * bump.ry / n)


@pytest.mark.parametrize("name, frozen", [("bulk", BULK_REFERENCE), ("high", HIGH_REFERENCE)])
def test_factor_references(name, frozen):
    val, err = ex.factor_reference(name)
    assert val == pytest.approx(frozen, abs=1e-9)
    assert err < 1e-6
    assert val == pytest.approx(_grid_haar_integral(ex.FACTOR_BUMPS[name]), abs=2e-5)


def test_haar_sampler_reproduces_bump_mean():
    A = haar_matrices(rng_for(5), 400_000, ymax=1e4)
    z = ex.tau(A)
    # the sampler's bases already sit in the fundamental domain
    assert (np.abs(z.real) <= 0.5 + 1e-12).all() and (np.abs(z) >= 1 - 1e-12).all()
    vals = ex.FACTOR_BUMPS["bulk"](z)
    se = vals.std() / math.sqrt(vals.size)
    assert abs(vals.mean() - BULK_REFERENCE) < 4 * se


def test_reduced_bases_land_in_fundamental_domain():
    P = ex.pair_array(seeded_pairs(3, 1)[0])
    R1, R2 = ex.flowed_reduced(P, 8.0, ex.r_grid(5000))
    for R in (R1, R2):
        z = ex.tau(R)
        assert (np.abs(z.real) <= 0.5 + 1e-9).all() and (np.abs(z) >= 1 - 1e-9).all()
        assert np.allclose(np.linalg.det(R), 1.0)


def test_constant_function_has_zero_gap():
    P = ex.pair_array(seeded_pairs(1, 1)[0])
    rows = ex.birkhoff_rows("p", P, [0, 6, 12], 2000, bumps=("one",))
    assert [r["gap"] for r in rows] == [0.0, 0.0, 0.0]


def test_coarse_grid_is_flagged():
    P = ex.pair_array(seeded_pairs(1, 1)[0])
    assert ex.birkhoff_rows("p", P, [1], 500, bumps=("one",))[0]["coarse_grid"] == 1
    assert ex.birkhoff_rows("p", P, [1], 1000, bumps=("one",))[0]["coarse_grid"] == 0


def test_closed_orbit_stays_on_the_hecke_correspondence():
    # sqrt2 Lambda1 is an index-2 sublattice of Lambda2, and a_t u_r preserves that
    P = ex.closed_orbit_pair()
    for t in (0.0, 4.0, 11.0):
        R1, R2 = ex.flowed_reduced(P, t, ex.r_grid(2000))
        assert ex.hecke2_distance(R1, R2).max() < 1e-9


def test_hecke2_distance_vanishes_only_on_related_pairs():
    Z = np.eye(2)
    two = np.array([[math.sqrt(2), 0.0], [0.0, 1 / math.sqrt(2)]])
    assert ex.hecke2_distance(two[None], Z[None])[0] < 1e-12
    assert ex.hecke2_distance(Z[None], Z[None])[0] > 0.3


def test_coset_tracking_is_consistent():
    g = haar_matrices(rng_for(0, 7), 1)[0]
    for m in (2, 3, 5):
        rows = ex.coset_rows(m, g, [2, 4, 6], 4000)
        assert all(r["tracking_mismatch"] == 0 for r in rows)
        assert {r["index"] for r in rows} == {m + 1}


def test_coset_m1_matches_single_factor_average():
    g = haar_matrices(rng_for(0, 7), 1)[0]
    rows = [r for r in ex.coset_rows(1, g, [3.0], 4000) if r["bump"] == "bulk"]
    P = np.stack([g, g])
    X = [r for r in ex.birkhoff_rows("g", P, [3.0], 4000, bumps=("bulk_first",))]
    assert rows[0]["average"] == pytest.approx(X[0]["average"], abs=1e-12)
    ident = [r for r in ex.coset_rows(1, g, [3.0], 4000) if r["bump"] == "coset_identity"]
    assert ident[0]["average"] == 1.0


def test_density_self_distance_is_zero():
    x = ex.lshape_point(16)
    rows, events = ex.density_rows(x, x, [0], 11, 0.5)
    assert rows[0]["min_distance"] == pytest.approx(0.0, abs=1e-12)
    assert rows[0]["r_at_min"] == 0.0
    assert events and events[0]["r"] == 0.0


def test_density_distance_agrees_with_scalar_dist():
    src = ex.seeded_point(4)
    tgt = ex.prototype_targets([8])[0]
    rows, _ = ex.density_rows(src, tgt, [2.0], 201, 0.1)
    r = rows[0]["r_at_min"]
    g = ex.flow_matrices(2.0, np.array([r]))[0]
    P = LatticePair(*(LatticeBasis(tuple((g @ B)[:, 0]), tuple((g @ B)[:, 1])) for B in src.pair))
    Q = LatticePair(*(LatticeBasis(tuple(B[:, 0]), tuple(B[:, 1])) for B in tgt.pair))
    want = dist_X(P, Q) + abs(src.log_ratio - tgt.log_ratio)
    assert rows[0]["min_distance"] == pytest.approx(want, abs=1e-9)


def test_flowstat_rows_and_fit():
    pair = seeded_pairs(2, 1)[0]
    rows = ex.flowstat_rows(0, pair, [0, 12], [0.05, 0.1, 0.2], (0, 1))
    assert len(rows) == 6
    for r in rows:
        assert r["ratio"] == pytest.approx(r["measure"] / r["eps"])
    zero = [r for r in rows if r["t"] == 0]
    assert all(r["measure"] == 0 for r in zero)
    at12 = [r["measure"] for r in rows if r["t"] == 12]
    assert at12 == sorted(at12)
    assert ex.fitted_constant(rows) == max(r["ratio"] for r in rows)
    assert ex.fitted_constant([]) == 0.0
