"""Explicit optimal plans and maps for repulsive harmonic costs, in any dimension."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import InvalidDomain, InvalidInput
from .measures import DiscreteMeasure, build_counterexample_measure, build_counterexample_parts
from .plans import SparsePlan, northwest_corner, symmetrize


@dataclass(frozen=True)
class MongeTuple:
    """Map-induced plan on equal-mass atoms: ``N-1`` permutations of the base atoms.

    Atom ``i`` of the base measure travels to atoms ``maps[0][i], ...,
    maps[N-2][i]``.
    """

    base: DiscreteMeasure
    maps: tuple

    def __post_init__(self):
        maps = tuple(np.asarray(m, dtype=np.int64) for m in self.maps)
        n = self.base.size
        for m in maps:
            if m.shape != (n,) or not np.array_equal(np.sort(m), np.arange(n)):
                raise InvalidInput("each map must be a permutation of the base atoms")
        if not np.allclose(self.base.weights, self.base.weights[0], rtol=0, atol=1e-15):
            raise InvalidInput("permutation maps preserve the base measure only for equal masses")
        object.__setattr__(self, "maps", maps)

    @property
    def N(self) -> int:
        return len(self.maps) + 1

    def to_plan(self) -> SparsePlan:
        idx = np.column_stack([np.arange(self.base.size), *self.maps])
        return SparsePlan.from_atoms([self.base] * self.N, idx, self.base.weights)


# -- two marginals -----------------------------------------------------------


def _anti_monotone_1d(mu1: DiscreteMeasure, mu2: DiscreteMeasure) -> SparsePlan:
    up = np.argsort(mu1.points[:, 0], kind="stable")
    down = np.argsort(-mu2.points[:, 0], kind="stable")
    return northwest_corner([mu1, mu2], [up, down])


def _axis_marginal(mu: DiscreteMeasure, a: int) -> DiscreteMeasure:
    return DiscreteMeasure.from_points(mu.points[:, a], mu.weights)


def _componentwise_map(mu1: DiscreteMeasure, mu2: DiscreteMeasure):
    """Try the coordinatewise anti-monotone map; None if it is not a valid coupling."""
    image = np.empty_like(mu1.points)
    for a in range(mu1.dim):
        m1, m2 = _axis_marginal(mu1, a), _axis_marginal(mu2, a)
        plan = _anti_monotone_1d(m1, m2)
        if len(plan) != m1.size:
            return None
        lookup = dict(zip(m1.points[plan.index[:, 0], 0].tolist(), m2.points[plan.index[:, 1], 0].tolist()))
        image[:, a] = [lookup[v] for v in mu1.points[:, a].tolist()]
    targets = {tuple(p): i for i, p in enumerate(mu2.points.tolist())}
    try:
        j = np.array([targets[tuple(p)] for p in image.tolist()])
    except KeyError:
        return None
    pushed = np.bincount(j, weights=mu1.weights, minlength=mu2.size)
    if np.max(np.abs(pushed - mu2.weights)) > 1e-12:
        return None
    return SparsePlan.from_atoms([mu1, mu2], np.column_stack([np.arange(mu1.size), j]), mu1.weights)


def _product_factors(mu: DiscreteMeasure):
    axes = [_axis_marginal(mu, a) for a in range(mu.dim)]
    if np.prod([m.size for m in axes]) != mu.size:
        return None
    lookup = [dict(zip(m.points[:, 0].tolist(), m.weights)) for m in axes]
    for p, w in zip(mu.points.tolist(), mu.weights):
        if abs(np.prod([lk[x] for lk, x in zip(lookup, p)]) - w) > 1e-12:
            return None
    return axes


def _product_coupling(mu1, mu2, f1, f2) -> SparsePlan:
    per_axis = [_anti_monotone_1d(a, b) for a, b in zip(f1, f2)]
    p1, p2, w = np.zeros((1, 0)), np.zeros((1, 0)), np.ones(1)
    for a, plan in enumerate(per_axis):
        x1 = f1[a].points[plan.index[:, 0]]
        x2 = f2[a].points[plan.index[:, 1]]
        p1 = np.concatenate([np.repeat(p1, len(plan), axis=0), np.tile(x1, (len(w), 1))], axis=1)
        p2 = np.concatenate([np.repeat(p2, len(plan), axis=0), np.tile(x2, (len(w), 1))], axis=1)
        w = np.repeat(w, len(plan)) * np.tile(plan.mass, len(w))
    coords = np.stack([p1, p2], axis=1)
    return SparsePlan.from_coordinates(coords, w, marginals=[mu1, mu2])


def anti_monotone_plan(mu1: DiscreteMeasure, mu2: DiscreteMeasure, d: int | None = None) -> SparsePlan:
    """Coupling that pairs small atoms of ``mu1`` with large atoms of ``mu2``.

    In one dimension this is the northwest-corner rule on ``mu1`` ascending
    against ``mu2`` descending; it minimizes ``|x_1 + x_2|^2`` (equivalently
    the two-marginal repulsive cost) over all couplings.

    For ``d > 1`` the construction is coordinatewise. It is accepted when the
    coordinatewise anti-monotone map sends ``mu1`` onto ``mu2`` exactly, or when
    both marginals are product measures (then the plan is the product of the
    one-dimensional couplings). Anything else raises ``InvalidDomain``.
    """
    d = mu1.dim if d is None else d
    if mu1.dim != d or mu2.dim != d:
        raise InvalidInput("marginal dimensions do not match d")
    if d == 1:
        return _anti_monotone_1d(mu1, mu2)
    plan = _componentwise_map(mu1, mu2)
    if plan is not None:
        return plan
    f1, f2 = _product_factors(mu1), _product_factors(mu2)
    if f1 is None or f2 is None:
        raise InvalidDomain("componentwise anti-monotone coupling needs aligned product grids")
    return _product_coupling(mu1, mu2, f1, f2)


# -- counterexample plans -----------------------------------------------------


def gamma0(d: int, n: int) -> SparsePlan:
    """Optimal coupling of ``(mu_C, mu_R, mu_L)``: every C atom ``x`` is split
    evenly between ``(x, x + 3^k, -2x - 3^k)`` for ``k = 1, 2``.
    """
    mu_c, mu_r, mu_l = build_counterexample_parts(d, n)
    m = mu_c.size
    i = np.arange(m)
    rows = np.concatenate([np.column_stack([i, i + k * m, i + k * m]) for k in (0, 1)])
    mass = np.tile(mu_c.weights / 2, 2)
    return SparsePlan.from_atoms([mu_c, mu_r, mu_l], rows, mass)


def gamma1(d: int, n: int) -> SparsePlan:
    """Symmetrization of :func:`gamma0` with all three marginals equal to the mixed measure."""
    g0 = gamma0(d, n)
    mu = build_counterexample_measure(d, n)
    m = g0.marginals[0].size
    # atom offsets of the C, R, L blocks inside the mixed measure
    offsets = np.array([0, m, 3 * m])
    lifted = g0.index + offsets
    base = SparsePlan((mu, mu, mu), lifted, g0.mass, check=False)
    return symmetrize(base)


# -- fractal orbit ------------------------------------------------------------


def _digits(z, N: int, K: int) -> list:
    """First ``K`` base-``N`` digits of ``z`` in [0, 1], terminating form for N-adic rationals."""
    q = Fraction(z)
    if q < 0 or q > 1:
        raise InvalidInput(f"z = {z} outside [0, 1]")
    if q == 1:
        return [N - 1] * K
    head = (q * N**K).numerator // (q * N**K).denominator
    out = []
    for _ in range(K):
        head, r = divmod(head, N)
        out.append(r)
    return out[::-1]


def _shift_index(j: int, N: int, K: int, times: int = 1) -> int:
    """Apply the cyclic digit shift ``times`` times to the K-digit integer ``j``."""
    out, place = 0, 1
    for _ in range(K):
        j, r = divmod(j, N)
        out += ((r + times) % N) * place
        place *= N
    return out


def fractal_map(N: int, z, K: int) -> Fraction:
    """Digit-shift map ``T`` truncated to ``K`` base-``N`` digits.

    Each digit ``a`` of ``z`` becomes ``a + 1 mod N``. The result is exact
    (a ``Fraction``); it differs from the untruncated map by at most ``N**-K``.
    Floats are read exactly, so pass a ``Fraction`` for N-adic inputs that are
    not dyadic.
    """
    if N < 2 or K < 1:
        raise InvalidInput("need N >= 2 and K >= 1")
    digits = _digits(z, N, K)
    num = 0
    for a in digits:
        num = num * N + (a + 1) % N
    return Fraction(num, N**K)


def fractal_orbit_index(N: int, j: int, K: int, steps: int) -> list:
    """Orbit of the grid point ``j / N**K`` under the truncated map, as integers."""
    return [_shift_index(j, N, K, t) for t in range(steps)]


@dataclass(frozen=True)
class FractalPlanResult:
    plan: SparsePlan
    max_deviation: float
    bound: float


def fractal_plan(N: int, d: int, M: int, K: int) -> FractalPlanResult:
    """Empirical orbit plan ``(id, T~, ..., T~^{N-1})`` on the grid ``{j/M}^d``.

    ``M`` points per axis, so ``M**d`` atoms of equal mass. When ``M`` is a
    power of ``N`` not exceeding ``N**K`` every marginal equals the grid
    measure. ``max_deviation`` is the sup-norm distance of the orbit sums to
    ``N/2``, bounded by ``d * N * N**-K``.
    """
    if N < 2 or d < 1 or M < 1 or K < 1:
        raise InvalidInput("need N >= 2, d >= 1, M >= 1, K >= 1")
    axis = [Fraction(j, M) for j in range(M)]
    # orbit of every axis value, exact
    orbit = []
    for z in axis:
        seq = [z]
        for _ in range(N - 1):
            seq.append(fractal_map(N, seq[-1], K))
        orbit.append(seq)
    sums = [sum(seq) for seq in orbit]
    dev_axis = max(abs(float(s - Fraction(N, 2))) for s in sums)
    vals = np.array([[float(q) for q in seq] for seq in orbit])  # (M, N)
    grid = np.array(np.meshgrid(*[np.arange(M)] * d, indexing="ij")).reshape(d, -1).T
    coords = np.stack([vals[grid, t] for t in range(N)], axis=1)  # (M^d, N, d)
    mass = np.full(len(grid), 1.0 / len(grid))
    plan = SparsePlan.from_coordinates(coords, mass)
    return FractalPlanResult(plan=plan, max_deviation=dev_axis, bound=d * N * float(N) ** -K)


# -- reflection -----------------------------------------------------------------


def reflection_plan(mu: DiscreteMeasure, N: int) -> SparsePlan:
    """Plan induced by ``(id, -id, id, -id, ...)`` for even ``N``.

    ``mu`` must be invariant under ``x -> -x`` (atoms and weights exactly).
    """
    if N < 2 or N % 2:
        raise InvalidDomain(f"reflection plan needs an even number of marginals, got {N}")
    lookup = {tuple(p): i for i, p in enumerate(mu.points.tolist())}
    mirror = []
    for i, p in enumerate(mu.points.tolist()):
        j = lookup.get(tuple(-x for x in p))
        if j is None or mu.weights[j] != mu.weights[i]:
            raise InvalidDomain("measure is not symmetric under x -> -x")
        mirror.append(j)
    i = np.arange(mu.size)
    mirror = np.array(mirror)
    idx = np.column_stack([i if t % 2 == 0 else mirror for t in range(N)])
    return SparsePlan.from_atoms([mu] * N, idx, mu.weights)


# -- diffuse plan ---------------------------------------------------------------


def fat_plan(m: int) -> SparsePlan:
    """Quadrature of the diffuse plan on the hexagon ``{x1+x2+x3 = 0} ∩ [-1,1]^3``.

    The hexagon is tiled by ``6 m^2`` equal triangles of the lattice
    ``{(a, b, c)/m : a + b + c = 0}``; each triangle contributes its centroid
    with weight ``max(|x1|, |x2|, |x3|)``, then masses are normalized to one.
    Centroids have integer barycentric coordinates over ``3m``; the unit
    ``1/(3m)`` is replaced by its nearest multiple of ``2**-40`` so that every
    tuple sums to zero exactly in floating point (relative scale error below
    ``1e-9``).
    """
    if int(m) != m or m < 1:
        raise InvalidInput("m must be a positive integer")
    m = int(m)
    unit = round(2.0**40 / (3 * m)) / 2.0**40
    a = np.arange(-3 * m + 1, 3 * m)
    a = a[a % 3 != 0]
    A, B = (g.ravel() for g in np.meshgrid(a, a, indexing="ij"))
    C = -(A + B)
    # up-triangle centroids have all residues 2 mod 3, down-triangles all 1
    keep = (A % 3 == B % 3) & (B % 3 == C % 3) & (np.abs(C) < 3 * m)
    A, B, C = A[keep], B[keep], C[keep]
    w = np.maximum(np.maximum(np.abs(A), np.abs(B)), np.abs(C)).astype(float)
    coords = np.stack([A * unit, B * unit, C * unit], axis=1)[:, :, None]
    return SparsePlan.from_coordinates(coords, w / w.sum())


def binned_uniform_l1(mu: DiscreteMeasure, lo: float = -1.0, hi: float = 1.0, bins: int = 20) -> float:
    """L1 distance between the binned masses of ``mu`` and the uniform law on ``[lo, hi]``."""
    hist, _ = np.histogram(mu.points[:, 0], bins=bins, range=(lo, hi), weights=mu.weights)
    return float(np.abs(hist - 1.0 / bins).sum() + max(0.0, 1.0 - hist.sum()))
