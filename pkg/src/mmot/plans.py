"""Sparse N-way couplings over the atoms of N discrete marginals."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .costs import CostSpec, cost_of_tuples
from .errors import BlockStructureViolation, InfeasiblePlan, InvalidInput, NotExchangeable
from .measures import MASS_TOL, BlockLayout, DiscreteMeasure

FEASIBILITY_TOL = 1e-9
DEFAULT_MASS_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class SparsePlan:
    """A coupling stored as index tuples into its marginals.

    Parameters
    ----------
    marginals : sequence of DiscreteMeasure, length N
    index : int array, shape (K, N)
        Row ``r`` names one atom of each marginal.
    mass : float array, shape (K,)

    Construction validates the coupling: masses are nonnegative and sum to
    one, tuples are unique, and every projection matches its marginal within
    ``FEASIBILITY_TOL``. Pass ``check=False`` to skip the projection test
    (used for partial solver output); :meth:`feasibility_residual` reports it.
    """

    marginals: tuple
    index: np.ndarray
    mass: np.ndarray
    check: bool = True

    def __post_init__(self):
        margs = tuple(self.marginals)
        if len(margs) < 1:
            raise InvalidInput("a plan needs at least one marginal")
        idx = np.array(self.index, dtype=np.int64).reshape(-1, len(margs))
        mass = np.array(self.mass, dtype=float).reshape(-1)
        if idx.shape[0] != mass.shape[0]:
            raise InvalidInput("index rows and masses differ in length")
        for j, mu in enumerate(margs):
            if idx.size and (idx[:, j].min() < 0 or idx[:, j].max() >= mu.size):
                raise InvalidInput(f"atom index out of range in coordinate {j + 1}")
        if np.any(mass < 0) or not np.all(np.isfinite(mass)):
            raise InfeasiblePlan("negative or non-finite mass")
        if np.unique(idx, axis=0).shape[0] != idx.shape[0]:
            raise InvalidInput("duplicate index tuples; build with SparsePlan.from_atoms")
        idx.setflags(write=False)
        mass.setflags(write=False)
        object.__setattr__(self, "marginals", margs)
        object.__setattr__(self, "index", idx)
        object.__setattr__(self, "mass", mass)
        if self.check:
            if abs(mass.sum() - 1.0) > MASS_TOL:
                raise InfeasiblePlan(f"plan masses sum to {mass.sum()!r}")
            res = self.feasibility_residual()
            if res > FEASIBILITY_TOL:
                raise InfeasiblePlan(f"marginal violation {res:.3e} exceeds {FEASIBILITY_TOL}")

    # -- construction -------------------------------------------------------

    @classmethod
    def from_atoms(cls, marginals, index, mass, drop_below: float = 0.0, check: bool = True):
        """Merge duplicate tuples, drop masses ``<= drop_below``, sort rows."""
        margs = tuple(marginals)
        idx = np.asarray(index, dtype=np.int64).reshape(-1, len(margs))
        mass = np.asarray(mass, dtype=float).reshape(-1)
        keep = mass > drop_below
        idx, mass = idx[keep], mass[keep]
        if idx.shape[0] == 0:
            return cls(margs, idx, mass, check=check)
        uniq, inverse = np.unique(idx, axis=0, return_inverse=True)
        merged = np.zeros(uniq.shape[0])
        np.add.at(merged, inverse.reshape(-1), mass)
        return cls(margs, uniq, merged, check=check)

    @classmethod
    def from_coordinates(cls, coords, mass, marginals=None, check: bool = True):
        """Plan from explicit point tuples, shape ``(K, N, d)``.

        Without ``marginals`` each marginal is built as the pushforward of the
        tuples (atoms in first-occurrence order). With ``marginals`` every
        coordinate is looked up exactly among the given atoms.
        """
        X = np.asarray(coords, dtype=float)
        if X.ndim == 2:
            X = X[:, :, None]
        K, N, d = X.shape
        mass = np.asarray(mass, dtype=float).reshape(-1)
        if marginals is None:
            marginals = [DiscreteMeasure.from_points(X[:, j, :], mass) for j in range(N)]
        marginals = tuple(marginals)
        idx = np.empty((K, N), dtype=np.int64)
        for j, mu in enumerate(marginals):
            lookup = {tuple(p): i for i, p in enumerate(mu.points.tolist())}
            try:
                idx[:, j] = [lookup[tuple(p)] for p in X[:, j, :].tolist()]
            except KeyError as exc:
                raise InvalidInput(f"point {exc.args[0]} is not an atom of marginal {j + 1}") from None
        return cls.from_atoms(marginals, idx, mass, check=check)

    # -- accessors ----------------------------------------------------------

    @property
    def N(self) -> int:
        return len(self.marginals)

    @property
    def d(self) -> int:
        return self.marginals[0].dim

    def __len__(self):
        return self.index.shape[0]

    def coordinates(self) -> np.ndarray:
        """Point tuples of the support atoms, shape ``(K, N, d)``."""
        return np.stack([mu.points[self.index[:, j]] for j, mu in enumerate(self.marginals)], axis=1)

    def projection_weights(self, j0: int) -> np.ndarray:
        """Pushforward weights on the atoms of marginal ``j0`` (0-based)."""
        return np.bincount(self.index[:, j0], weights=self.mass, minlength=self.marginals[j0].size)

    def feasibility_residual(self) -> float:
        """Largest absolute deviation between a projection and its marginal."""
        if len(self) == 0:
            return max(float(mu.weights.max()) for mu in self.marginals)
        return max(
            float(np.max(np.abs(self.projection_weights(j) - mu.weights)))
            for j, mu in enumerate(self.marginals)
        )

    def support(self) -> frozenset:
        return frozenset(map(tuple, self.index.tolist()))

    def support_above(self, tol: float) -> frozenset:
        return frozenset(map(tuple, self.index[self.mass > tol].tolist()))

    def dense(self) -> np.ndarray:
        out = np.zeros(tuple(mu.size for mu in self.marginals))
        out[tuple(self.index.T)] = self.mass
        return out

    def tuple_sums(self) -> np.ndarray:
        """``x_1 + ... + x_N`` for each support atom, summed left to right."""
        X = self.coordinates()
        s = X[:, 0, :].copy()
        for j in range(1, self.N):
            s = s + X[:, j, :]
        return s


def plans_close(a: SparsePlan, b: SparsePlan, tol: float = 1e-9, mass_tol: float = 0.0) -> bool:
    """Same support (atoms heavier than ``mass_tol``) and masses within ``tol``."""
    da = {t: m for t, m in zip(map(tuple, a.index.tolist()), a.mass) if m > mass_tol}
    db = {t: m for t, m in zip(map(tuple, b.index.tolist()), b.mass) if m > mass_tol}
    if da.keys() != db.keys():
        return False
    return all(abs(da[t] - db[t]) <= tol for t in da)


def northwest_corner(marginals: Sequence[DiscreteMeasure], orders=None) -> SparsePlan:
    """Multi-marginal northwest-corner rule along the given atom orders.

    The result is a vertex of the coupling polytope with at most
    ``sum(n_j) - N + 1`` atoms. Zero-weight atoms are skipped.
    """
    margs = tuple(marginals)
    if orders is None:
        orders = [np.arange(mu.size) for mu in margs]
    orders = [np.asarray(o)[margs[j].weights[np.asarray(o)] > 0] for j, o in enumerate(orders)]
    resid = [margs[j].weights[o].astype(float) for j, o in enumerate(orders)]
    ptr = [0] * len(margs)
    rows, masses = [], []
    while all(p < len(o) for p, o in zip(ptr, orders)):
        step = min(r[p] for r, p in zip(resid, ptr))
        rows.append([o[p] for o, p in zip(orders, ptr)])
        masses.append(step)
        exhausted = []
        for j in range(len(margs)):
            resid[j][ptr[j]] -= step
            if resid[j][ptr[j]] <= 1e-15:
                exhausted.append(j)
        # advance every exhausted pointer; round-off leftovers are discarded
        for j in exhausted:
            ptr[j] += 1
    masses = np.array(masses)
    masses /= masses.sum()
    return SparsePlan.from_atoms(margs, rows, masses)


def random_vertex_plan(marginals: Sequence[DiscreteMeasure], rng: np.random.Generator) -> SparsePlan:
    """A random vertex of the coupling polytope (northwest corner on shuffled orders)."""
    orders = [rng.permutation(mu.size) for mu in marginals]
    return northwest_corner(marginals, orders)


# -- operations -------------------------------------------------------------


def _coord(gamma: SparsePlan, j: int) -> int:
    if not 1 <= j <= gamma.N:
        raise InvalidInput(f"coordinate {j} outside 1..{gamma.N}")
    return j - 1


def marginal(gamma: SparsePlan, j: int) -> DiscreteMeasure:
    """Pushforward of ``gamma`` under the ``j``-th projection (``j`` is 1-based).

    Atoms of the result are those of the ``j``-th marginal, in the same order.
    """
    j0 = _coord(gamma, j)
    w = gamma.projection_weights(j0)
    return DiscreteMeasure(gamma.marginals[j0].points, w / w.sum())


def plan_cost(spec: CostSpec, gamma: SparsePlan) -> float:
    """Integral of the cost against the plan."""
    if gamma.N != spec.N or gamma.d != spec.d:
        raise InvalidInput(f"plan is {gamma.N}-marginal in R^{gamma.d}, cost expects {spec.N}, {spec.d}")
    res = gamma.feasibility_residual()
    if res > FEASIBILITY_TOL:
        raise InfeasiblePlan(f"marginal violation {res:.3e}")
    return float(gamma.mass @ cost_of_tuples(spec.kind, gamma.coordinates()))


def _all_marginals_equal(gamma: SparsePlan) -> bool:
    first = gamma.marginals[0]
    return all(
        mu is first
        or (np.array_equal(mu.points, first.points) and np.allclose(mu.weights, first.weights, rtol=0, atol=MASS_TOL))
        for mu in gamma.marginals[1:]
    )


def symmetrize(gamma: SparsePlan) -> SparsePlan:
    """Average of the N! coordinate permutations of ``gamma``.

    All marginals must coincide (same atoms in the same order, same weights).
    """
    if not _all_marginals_equal(gamma):
        raise NotExchangeable("symmetrization needs identical marginals")
    perms = list(itertools.permutations(range(gamma.N)))
    idx = np.concatenate([gamma.index[:, p] for p in perms])
    mass = np.tile(gamma.mass, len(perms)) / math.factorial(gamma.N)
    return SparsePlan.from_atoms(gamma.marginals, idx, mass)


@dataclass(frozen=True)
class GraphDiagnostic:
    """Per-atom count of distinct partner tuples in the disintegration."""

    coordinate: int
    multiplicity: dict
    max_multiplicity: int
    min_multiplicity: int
    is_graphical: bool

    def histogram(self) -> dict:
        counts: dict = {}
        for m in self.multiplicity.values():
            counts[m] = counts.get(m, 0) + 1
        return dict(sorted(counts.items()))


def graph_multiplicity(gamma: SparsePlan, j: int, mass_tol: float = DEFAULT_MASS_TOL) -> GraphDiagnostic:
    """Disintegrate along coordinate ``j`` (1-based) and count partners.

    For every atom of the ``j``-th marginal carrying more than ``mass_tol``,
    count the distinct tuples of the other coordinates whose conditional mass
    exceeds ``mass_tol``. Ties are not broken; all partners are counted.
    """
    j0 = _coord(gamma, j)
    base = gamma.projection_weights(j0)
    mult: dict = {}
    for a in np.flatnonzero(base > mass_tol):
        rows = gamma.index[:, j0] == a
        cond = gamma.mass[rows] / base[a]
        partners = {tuple(np.delete(r, j0)) for r in gamma.index[rows][cond > mass_tol].tolist()}
        mult[int(a)] = len(partners)
    values = list(mult.values()) or [0]
    return GraphDiagnostic(
        coordinate=j,
        multiplicity=mult,
        max_multiplicity=max(values),
        min_multiplicity=min(values),
        is_graphical=max(values) <= 1,
    )


def _labels(gamma: SparsePlan, layout: BlockLayout) -> list:
    if layout.d != gamma.d:
        raise InvalidInput(f"layout is {layout.d}-dimensional, plan is {gamma.d}-dimensional")
    X = gamma.coordinates()
    return [[layout.classify(x) for x in row] for row in X]


def _is_block_triple(labels) -> bool:
    ordered = sorted(l or "" for l in labels)
    return ordered in (["C", "L1", "R1"], ["C", "L2", "R2"])


def check_block_structure(gamma: SparsePlan, layout: BlockLayout) -> tuple:
    """Check that each support tuple is ``L^k x C x R^k`` up to permutation.

    Returns ``(ok, violations)`` where ``violations`` lists the offending
    coordinate tuples. Only three-marginal plans can pass.
    """
    violations = []
    if len(gamma) == 0:
        return True, violations
    X = gamma.coordinates()
    for row, labels in zip(X, _labels(gamma, layout)):
        if gamma.N != 3 or not _is_block_triple(labels):
            violations.append(row.tolist())
    return not violations, violations


_TARGET_ORDER = {"C": 0, "R": 1, "L": 2}


def reorder_blocks(gamma: SparsePlan, layout: BlockLayout, targets=None) -> SparsePlan:
    """Permute each support tuple into ``C x R x L`` order.

    Every tuple must have exactly one coordinate in each of C, R and L.
    ``targets`` optionally fixes the output marginals (e.g. the parts
    ``(mu_C, mu_R, mu_L)``); otherwise they are the pushforwards.
    """
    if gamma.N != 3:
        raise BlockStructureViolation("block reordering is defined for three marginals")
    X = gamma.coordinates()
    out = np.empty_like(X)
    bad = []
    for r, (row, labels) in enumerate(zip(X, _labels(gamma, layout))):
        families = [l[0] if l else None for l in labels]
        if sorted(f or "" for f in families) != ["C", "L", "R"]:
            bad.append(row.tolist())
            continue
        for pos, fam in enumerate(families):
            out[r, _TARGET_ORDER[fam]] = row[pos]
    if bad:
        raise BlockStructureViolation(
            f"{len(bad)} support tuple(s) lack one point in each of C, R, L; first: {bad[0]}",
            offending=bad,
        )
    return SparsePlan.from_coordinates(out, gamma.mass, marginals=targets)
