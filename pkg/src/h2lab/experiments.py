"""Batch experiments: flow statistics, horocycle averages on X and on G/Gamma0(m), density sweeps.

Lattices here are float bases with columns as generators.  A pair is an array of
shape (2, 2, 2) indexed [factor, row, column]; both factors are unimodular.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate

from .lattice import LatticeBasis, LatticePair, dist_X_batch, reduced_matrices
from .nondivergence import flow_sublevel_measure
from .prototypes import enumerate_split_prototypes, lshape_splitting, prototypical_pair, prototypical_splitting
from .prototypes import EigenformPrototype
from .sampling import haar_matrices, rng_for, seeded_pairs
from .spectra import canonical_point, gamma0_cosets
from .splitting import SplittingTriple

HAAR_DENSITY = 3 / math.pi  # dx dy / y^2 normalized on the standard fundamental domain
MIN_R_RESOLUTION = 1000
MC_SAMPLES = 10**6
MC_SEED = 20240701


# ----- float lattices ------------------------------------------------------


def unimodular_float(L: LatticeBasis) -> np.ndarray:
    """Positively oriented float basis scaled to area 1."""
    B = L.to_float().oriented().matrix.to_numpy()
    return B / math.sqrt(abs(np.linalg.det(B)))


def pair_array(pair: LatticePair) -> np.ndarray:
    return np.stack([unimodular_float(L) for L in pair])


def flow_matrices(t: float, rs: np.ndarray) -> np.ndarray:
    """a_t u_r for every r: [[e^(t/2), r e^(t/2)], [0, e^(-t/2)]]."""
    g = np.zeros((rs.size, 2, 2))
    e = math.exp(t / 2)
    g[:, 0, 0] = e
    g[:, 0, 1] = rs * e
    g[:, 1, 1] = 1 / e
    return g


def tau(R: np.ndarray) -> np.ndarray:
    """e2 / e1 as complex numbers for a stack of bases; lies in the fundamental domain for reduced bases."""
    e1 = R[:, 0, 0] + 1j * R[:, 1, 0]
    e2 = R[:, 0, 1] + 1j * R[:, 1, 1]
    return e2 / e1


# ----- test functions ------------------------------------------------------


@dataclass(frozen=True)
class Bump:
    """(1 - rho^2)^2 on the ellipse rho < 1 around (x0, y0) in the upper half plane."""

    x0: float
    y0: float
    rx: float
    ry: float

    def __call__(self, z: np.ndarray) -> np.ndarray:
        rho2 = ((z.real - self.x0) / self.rx) ** 2 + ((z.imag - self.y0) / self.ry) ** 2
        return np.where(rho2 < 1, (1 - rho2) ** 2, 0.0)

    def haar_integral(self) -> tuple[float, float]:
        """Integral against (3/pi) dx dy / y^2 over the standard fundamental domain, with quadrature error."""

        def f(y, x):
            return float(self(np.array([complex(x, y)]))[0]) / (y * y)

        lo_x, hi_x = max(-0.5, self.x0 - self.rx), min(0.5, self.x0 + self.rx)
        val, err = integrate.dblquad(
            f,
            lo_x,
            hi_x,
            lambda x: max(math.sqrt(1 - x * x), self.y0 - self.ry),
            lambda x: max(math.sqrt(1 - x * x), self.y0 + self.ry),
            epsabs=1e-10,
            epsrel=1e-8,
        )
        return HAAR_DENSITY * val, HAAR_DENSITY * err


FACTOR_BUMPS = {
    "bulk": Bump(0.0, 1.25, 0.5, 0.4),
    "high": Bump(0.1, 2.2, 0.45, 0.8),
}

HECKE_RADIUS = 0.3


def _small_sl2z() -> np.ndarray:
    vals = (-1, 0, 1)
    out = [
        (a, b, c, d)
        for a in vals
        for b in vals
        for c in vals
        for d in vals
        if a * d - b * c == 1
    ]
    return np.array(out, dtype=float).reshape(-1, 2, 2)


_W = _small_sl2z()
_INDEX2 = [np.array([[2.0, 0.0], [0.0, 1.0]]), np.array([[1.0, 0.0], [0.0, 2.0]]), np.array([[1.0, 0.0], [1.0, 2.0]])]


def basis_gap(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """min over small gamma of the entrywise max |A - B gamma| for reduced bases (0 iff same lattice)."""
    diff = A[:, None] - B[:, None] @ _W[None]
    return np.abs(diff).max(axis=(-1, -2)).min(axis=1)


def hecke2_distance(R1: np.ndarray, R2: np.ndarray) -> np.ndarray:
    """How far sqrt2 Lambda1 is from the nearest index-2 sublattice of Lambda2 (reduced float bases)."""
    best = np.full(R1.shape[0], np.inf)
    A = reduced_matrices(R1.copy())
    for S in _INDEX2:
        M = reduced_matrices(R2 @ S / math.sqrt(2))
        best = np.minimum(best, basis_gap(A, M))
    return best


def hecke2_bump(R1: np.ndarray, R2: np.ndarray) -> np.ndarray:
    d2 = (hecke2_distance(R1, R2) / HECKE_RADIUS) ** 2
    return np.where(d2 < 1, (1 - d2) ** 2, 0.0)


def pair_test_functions() -> dict:
    """Test functions on X evaluated on reduced bases (R1, R2)."""
    bulk, high = FACTOR_BUMPS["bulk"], FACTOR_BUMPS["high"]
    return {
        "one": lambda R1, R2: np.ones(R1.shape[0]),
        "bulk_first": lambda R1, R2: bulk(tau(R1)),
        "bulk_second": lambda R1, R2: bulk(tau(R2)),
        "joint": lambda R1, R2: bulk(tau(R1)) * high(tau(R2)),
        "hecke2": hecke2_bump,
    }


DEFAULT_PAIR_BUMPS = ("one", "bulk_first", "bulk_second", "joint", "hecke2")


@lru_cache(maxsize=None)
def factor_reference(name: str) -> tuple[float, float]:
    return FACTOR_BUMPS[name].haar_integral()


@lru_cache(maxsize=None)
def hecke2_reference(samples: int = MC_SAMPLES, seed: int = MC_SEED) -> tuple[float, float]:
    """Monte Carlo Haar mean of the hecke2 bump with its standard error."""
    rng = rng_for(seed)
    total, total_sq, done = 0.0, 0.0, 0
    chunk = 100_000
    while done < samples:
        n = min(chunk, samples - done)
        A = haar_matrices(rng, n, ymax=1e4)
        B = haar_matrices(rng, n, ymax=1e4)
        v = hecke2_bump(A, B)
        total += v.sum()
        total_sq += (v * v).sum()
        done += n
    mean = total / samples
    var = max(total_sq / samples - mean * mean, 0.0)
    return mean, math.sqrt(var / samples)


def pair_reference(name: str) -> tuple[float, float]:
    """Haar mean of a pair test function and an error estimate."""
    if name == "one":
        return 1.0, 0.0
    if name == "bulk_first" or name == "bulk_second":
        return factor_reference("bulk")
    if name == "joint":
        (a, ea), (b, eb) = factor_reference("bulk"), factor_reference("high")
        return a * b, abs(a) * eb + abs(b) * ea
    if name == "hecke2":
        return hecke2_reference()
    raise KeyError(name)


# ----- horocycle averages on X ---------------------------------------------


def r_grid(resolution: int) -> np.ndarray:
    """Midpoint grid on [0, 1]."""
    return (np.arange(resolution) + 0.5) / resolution


def flowed_reduced(P: np.ndarray, t: float, rs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    g = flow_matrices(t, rs)
    return reduced_matrices(g @ P[0]), reduced_matrices(g @ P[1])


def birkhoff_rows(pair_id: str, P: np.ndarray, t_list, resolution: int, bumps=DEFAULT_PAIR_BUMPS, references=None) -> list[dict]:
    """Averages over the r-grid of each test function at a_t u_r P, next to the Haar reference."""
    funcs = pair_test_functions()
    references = references or {name: pair_reference(name) for name in bumps}
    rs = r_grid(resolution)
    coarse = resolution < MIN_R_RESOLUTION
    rows = []
    for t in t_list:
        R1, R2 = flowed_reduced(P, float(t), rs)
        for name in bumps:
            avg = float(funcs[name](R1, R2).mean())
            ref, err = references[name]
            rows.append(
                {
                    "pair_id": pair_id,
                    "t": t,
                    "bump": name,
                    "average": avg,
                    "reference": ref,
                    "reference_error": err,
                    "gap": float(abs(avg - ref)),
                    "coarse_grid": int(coarse),
                }
            )
    return rows


def closed_orbit_pair() -> np.ndarray:
    """Area-normalized prototypical pair for (e, ell, m) = (0, 1, 2)."""
    return pair_array(prototypical_pair(EigenformPrototype(0, 1, 2)))


# ----- horocycle averages on G / Gamma0(m) ----------------------------------


class CosetLabels:
    """Left cosets gamma Gamma0(m) labelled by the first column of gamma in P^1(Z/m)."""

    def __init__(self, m: int):
        self.m = m
        table = gamma0_cosets(m)
        self.size = table.size
        index = {p: i for i, p in enumerate(table.points)}
        lut = np.full((m, m), -1, dtype=np.int64)
        for a in range(m):
            for c in range(m):
                if math.gcd(math.gcd(a, c), m) == 1:
                    lut[a, c] = index[canonical_point(a, c, m)]
        self.lut = lut

    def of(self, gam: np.ndarray) -> np.ndarray:
        a = np.mod(gam[:, 0, 0].astype(np.int64), self.m)
        c = np.mod(gam[:, 1, 0].astype(np.int64), self.m)
        out = self.lut[a, c]
        if (out < 0).any():
            raise ArithmeticError("non-primitive column met while labelling cosets")
        return out


def _integral_part(R: np.ndarray, G: np.ndarray) -> np.ndarray:
    """gamma with G = R gamma, checked to be integral of determinant one."""
    gam = np.linalg.solve(R, G)
    rounded = np.rint(gam)
    if np.abs(gam - rounded).max() > 1e-6:
        raise ArithmeticError("reduction did not return an SL2(Z) factor")
    det = rounded[:, 0, 0] * rounded[:, 1, 1] - rounded[:, 0, 1] * rounded[:, 1, 0]
    if (det != 1).any():
        raise ArithmeticError("reduction factor is not in SL2(Z)")
    return rounded


def coset_rows(m: int, g_start: np.ndarray, t_list, resolution: int, bulk_reference=None) -> list[dict]:
    """Birkhoff averages along a_t u_r g Gamma0(m), r in [0, 1].

    The point is tracked as (reduced basis, coset label).  Each time the label is
    computed twice: directly from a_t u_r g, and by flowing the previous reduced
    basis forward and composing the integral factors.  Mismatches are counted.
    """
    labels = CosetLabels(m)
    rs = r_grid(resolution)
    identity_label = int(labels.of(np.eye(2)[None])[0])
    bulk = FACTOR_BUMPS["bulk"]
    bulk_ref, bulk_err = bulk_reference or factor_reference("bulk")
    rows = []
    prev_t, prev_R, prev_gam = 0.0, None, None
    base = np.broadcast_to(g_start, (rs.size, 2, 2))
    U = flow_matrices(0.0, rs) @ base
    prev_R = reduced_matrices(U.copy())
    prev_gam = _integral_part(prev_R, U)
    for t in sorted(float(x) for x in t_list):
        G = flow_matrices(t, rs) @ base
        R = reduced_matrices(G.copy())
        gam = _integral_part(R, G)
        direct = labels.of(gam)
        step = flow_matrices(t - prev_t, np.zeros(rs.size)) @ prev_R
        R2 = reduced_matrices(step.copy())
        gam2 = _integral_part(R2, step) @ prev_gam
        mismatch = int((labels.of(gam2) != direct).sum())
        prev_t, prev_R, prev_gam = t, R2, gam2
        z = tau(R)
        ind = (direct == identity_label).astype(float)
        vals = {
            "bulk": (bulk(z), bulk_ref, bulk_err),
            "coset_identity": (ind, 1 / labels.size, 0.0),
            "bulk_identity": (bulk(z) * ind, bulk_ref / labels.size, bulk_err / labels.size),
        }
        for name in ("bulk", "coset_identity", "bulk_identity"):
            v, ref, err = vals[name]
            avg = float(v.mean())
            rows.append(
                {
                    "m": m,
                    "index": labels.size,
                    "t": t,
                    "bump": name,
                    "average": avg,
                    "reference": ref,
                    "reference_error": err,
                    "gap": float(abs(avg - ref)),
                    "tracking_mismatch": mismatch,
                }
            )
    return rows


# ----- density sweeps ------------------------------------------------------


@dataclass(frozen=True)
class SurrogatePoint:
    """Absolute periods (area-normalized) and log of the area ratio of a splitting."""

    label: str
    D: int | None
    pair: np.ndarray
    log_ratio: float

    @classmethod
    def from_triple(cls, label: str, D, t: SplittingTriple) -> SurrogatePoint:
        ratio = float(t.lambda1.area) / float(t.lambda2.area)
        return cls(label, D, pair_array(LatticePair(t.lambda1, t.lambda2)), math.log(ratio))


def prototype_targets(D_list) -> list[SurrogatePoint]:
    out = []
    for D in D_list:
        for p in enumerate_split_prototypes(D):
            out.append(SurrogatePoint.from_triple(f"D{D}:{p.a},{p.b},{p.c},{p.e}", D, prototypical_splitting(p)))
    return out


def lshape_point(D: int) -> SurrogatePoint:
    return SurrogatePoint.from_triple(f"lshape{D}", D, lshape_splitting(D))


def seeded_point(seed: int) -> SurrogatePoint:
    """A generic source: seeded pair with a seeded log area ratio."""
    rng = rng_for(seed, 1_000_003)
    P = pair_array(seeded_pairs(seed, 1)[0])
    return SurrogatePoint(f"seeded{seed}", None, P, float(rng.uniform(-1.0, 1.0)))


def _target_pair(target: SurrogatePoint) -> LatticePair:
    return LatticePair(*(LatticeBasis(tuple(B[:, 0]), tuple(B[:, 1])) for B in target.pair))


def density_rows(source: SurrogatePoint, target: SurrogatePoint, t_list, resolution: int, rho: float, max_events: int = 20):
    """Per t: min over the r-grid of dist_X(a_t u_r x, z) + |log ratio(x) - log ratio(z)|, and closeness events."""
    rs = np.linspace(0.0, 1.0, resolution) if resolution > 1 else np.zeros(1)
    Q = _target_pair(target)
    shift = abs(source.log_ratio - target.log_ratio)
    rows, events = [], []
    for t in t_list:
        g = flow_matrices(float(t), rs)
        P = np.stack([g @ source.pair[0], g @ source.pair[1]], axis=1)
        d = dist_X_batch(P, Q) + shift
        i = int(np.argmin(d))
        rows.append(
            {
                "source": source.label,
                "target": target.label,
                "D": target.D if target.D is not None else "",
                "t": t,
                "min_distance": float(d[i]),
                "r_at_min": float(rs[i]),
            }
        )
        close = np.nonzero(d <= rho)[0]
        for j in close[:max_events]:
            events.append({"D": target.D if target.D is not None else "", "target": target.label, "t": t, "r": float(rs[j]), "distance": float(d[j])})
    return rows, events


# ----- flow statistics -----------------------------------------------------


def flowstat_rows(pair_id: int, pair: LatticePair, t_list, eps_list, interval) -> list[dict]:
    a, b = interval
    rows = []
    for t in t_list:
        for eps in sorted(eps_list):
            m = flow_sublevel_measure(pair, float(t), float(eps), (a, b))
            rows.append({"pair_id": pair_id, "t": t, "eps": eps, "measure": m, "ratio": m / (b - a) / eps})
    return rows


def fitted_constant(rows) -> float:
    """Smallest C with measure / |I| <= C eps on every row."""
    return max((r["ratio"] for r in rows), default=0.0)
