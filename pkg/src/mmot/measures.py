"""Discrete probability measures and the three-block counterexample family."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidDomain, InvalidInput

MASS_TOL = 1e-12
LOAD_MASS_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Weighted point cloud in R^d with total mass one.

    Parameters
    ----------
    points : array-like, shape (n, d)
    weights : array-like, shape (n,)
        Nonnegative, summing to 1 within ``MASS_TOL``.

    Points must be pairwise distinct; use :meth:`from_points` to merge
    duplicates.
    """

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        w = np.array(self.weights, dtype=float).reshape(-1)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        if pts.ndim != 2 or pts.shape[1] < 1:
            raise InvalidInput(f"points must be an (n, d) array, got shape {pts.shape}")
        if pts.shape[0] != w.shape[0]:
            raise InvalidInput("points and weights differ in length")
        if pts.shape[0] == 0:
            raise InvalidInput("a probability measure needs at least one atom")
        if not np.all(np.isfinite(pts)) or not np.all(np.isfinite(w)):
            raise InvalidInput("non-finite coordinates or weights")
        if np.any(w < 0):
            raise InvalidInput("negative weight")
        if abs(w.sum() - 1.0) > MASS_TOL:
            raise InvalidInput(f"weights sum to {w.sum()!r}, expected 1")
        if np.unique(pts, axis=0).shape[0] != pts.shape[0]:
            raise InvalidInput("duplicate atoms; build with DiscreteMeasure.from_points")
        pts.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_points(cls, points, weights) -> "DiscreteMeasure":
        """Build a measure, merging bitwise-identical points by adding weights.

        First-occurrence order of the points is kept.
        """
        pts = np.array(points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        w = np.asarray(weights, dtype=float).reshape(-1)
        if pts.shape[0] != w.shape[0]:
            raise InvalidInput("points and weights differ in length")
        uniq, first, inverse = np.unique(pts, axis=0, return_index=True, return_inverse=True)
        inverse = inverse.reshape(-1)
        if uniq.shape[0] == pts.shape[0]:
            return cls(pts, w)
        order = np.argsort(first)
        rank = np.empty_like(order)
        rank[order] = np.arange(order.size)
        merged = np.zeros(uniq.shape[0])
        np.add.at(merged, rank[inverse], w)
        return cls(uniq[order], merged)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def size(self) -> int:
        return self.points.shape[0]

    def __len__(self):
        return self.size

    def same_as(self, other: "DiscreteMeasure", tol: float = 0.0) -> bool:
        """Atom-for-atom equality (same order), weights compared within ``tol``."""
        return (
            self.points.shape == other.points.shape
            and np.array_equal(self.points, other.points)
            and bool(np.all(np.abs(self.weights - other.weights) <= tol))
        )

    def index_of(self, point) -> int:
        """Index of an atom by exact coordinates; ``KeyError`` if absent."""
        p = np.asarray(point, dtype=float).reshape(-1)
        hits = np.flatnonzero(np.all(self.points == p, axis=1))
        if hits.size == 0:
            raise KeyError(tuple(p))
        return int(hits[0])


def mixture(parts: Sequence[DiscreteMeasure], coeffs: Sequence[float]) -> DiscreteMeasure:
    """Convex combination of measures; atoms concatenated in the given order."""
    if len(parts) != len(coeffs):
        raise InvalidInput("one coefficient per part")
    dims = {p.dim for p in parts}
    if len(dims) != 1:
        raise InvalidInput("parts live in different dimensions")
    pts = np.concatenate([p.points for p in parts])
    w = np.concatenate([c * p.weights for p, c in zip(parts, coeffs)])
    return DiscreteMeasure.from_points(pts, w)


def moments(mu: DiscreteMeasure) -> tuple[np.ndarray, float]:
    """Return ``(mean, second_moment)`` with second moment ``sum w |x|^2``."""
    mean = mu.weights @ mu.points
    second = float(mu.weights @ np.einsum("ij,ij->i", mu.points, mu.points))
    return mean, second


def _check_box(box) -> np.ndarray:
    b = np.asarray(box, dtype=float)
    if b.ndim == 1:
        b = b.reshape(1, 2)
    if b.ndim != 2 or b.shape[1] != 2:
        raise InvalidDomain(f"box must be a sequence of (lo, hi) pairs, got {box!r}")
    if np.any(~np.isfinite(b)) or np.any(b[:, 1] <= b[:, 0]):
        raise InvalidDomain(f"box {b.tolist()} has zero volume")
    return b


def _midpoint_axis(lo: float, hi: float, n: int) -> np.ndarray:
    step = (hi - lo) / n
    return lo + (np.arange(n) + 0.5) * step


def _product(axes: Sequence[np.ndarray]) -> np.ndarray:
    return np.array(list(itertools.product(*axes)), dtype=float)


def discretize_uniform_box(box, n: int, density_scale: float | None = None) -> DiscreteMeasure:
    """Midpoint-grid discretization of the uniform law on an axis-aligned box.

    ``n`` atoms per axis, ``n**d`` in total, each of weight ``n**-d``.
    ``density_scale`` is optional: when given it must be the normalizing
    density ``1/volume`` (e.g. 2 for ``[0, 1/2]``), and a mismatch is an error.
    """
    b = _check_box(box)
    if int(n) != n or n < 1:
        raise InvalidDomain(f"n must be a positive integer, got {n!r}")
    n = int(n)
    if density_scale is not None:
        volume = float(np.prod(b[:, 1] - b[:, 0]))
        if abs(density_scale * volume - 1.0) > 1e-12:
            raise InvalidDomain(
                f"density {density_scale} on a box of volume {volume} is not a probability"
            )
    pts = _product([_midpoint_axis(lo, hi, n) for lo, hi in b])
    return DiscreteMeasure(pts, np.full(len(pts), 1.0 / len(pts)))


# -- counterexample ---------------------------------------------------------

BLOCK_LABELS = ("C", "R1", "R2", "L1", "L2")


@dataclass(frozen=True)
class BlockLayout:
    """Labeled boxes ``C_d, R_d^k, L_d^k`` and their masses.

    ``combined=True`` gives the masses under the mixed measure (1/3 on C,
    1/6 on each side block); otherwise each of C, R, L carries mass one.
    """

    d: int
    blocks: dict = field(default_factory=dict)
    masses: dict = field(default_factory=dict)

    @classmethod
    def counterexample(cls, d: int = 1, combined: bool = True) -> "BlockLayout":
        if d < 1:
            raise InvalidDomain("dimension must be positive")
        one = lambda lo, hi: tuple((lo, hi) for _ in range(d))  # noqa: E731
        blocks = {"C": one(0.0, 0.5)}
        for k in (1, 2):
            blocks[f"R{k}"] = one(3.0**k, 3.0**k + 0.5)
            blocks[f"L{k}"] = one(-(3.0**k) - 1.0, -(3.0**k))
        if combined:
            masses = {"C": 1 / 3, "R1": 1 / 6, "R2": 1 / 6, "L1": 1 / 6, "L2": 1 / 6}
        else:
            masses = {"C": 1.0, "R1": 0.5, "R2": 0.5, "L1": 0.5, "L2": 0.5}
        return cls(d=d, blocks=blocks, masses=masses)

    def classify(self, point) -> str | None:
        """Label of the block containing ``point`` (closed boxes), or None."""
        p = np.asarray(point, dtype=float).reshape(-1)
        if p.size != self.d:
            raise InvalidInput(f"expected a {self.d}-vector")
        for label, box in self.blocks.items():
            if all(lo <= x <= hi for x, (lo, hi) in zip(p, box)):
                return label
        return None

    def classify_many(self, points) -> list:
        return [self.classify(p) for p in np.asarray(points, dtype=float).reshape(-1, self.d)]


def _center_axis(n: int) -> np.ndarray:
    # midpoints of [0, 1/2] snapped to multiples of 2**-40: then x + 3^k and
    # -2x - 3^k are exact doubles and tuple sums vanish in any order
    # (unchanged when n is a power of two)
    return np.round((np.arange(n) + 0.5) / (2 * n) * 2.0**40) / 2.0**40


def build_counterexample_parts(d: int, n: int):
    """Aligned discretizations ``(mu_C, mu_R, mu_L)`` of the three blocks.

    ``mu_C`` is the midpoint grid of ``[0, 1/2]^d`` (``n`` atoms per axis,
    rounded to multiples of ``2**-40``).
    ``mu_R`` and ``mu_L`` are its exact images under ``x -> x + 3^k`` and
    ``x -> -2x - 3^k`` (k = 1, 2), mass 1/2 per block. Atom ``i`` of
    ``mu_C`` corresponds to atom ``(k-1) * n**d + i`` of ``mu_R`` and ``mu_L``.
    """
    if int(d) != d or d < 1:
        raise InvalidDomain(f"dimension must be a positive integer, got {d!r}")
    if int(n) != n or n < 1:
        raise InvalidDomain(f"n must be a positive integer, got {n!r}")
    d, n = int(d), int(n)
    x = _product([_center_axis(n)] * d)
    m = len(x)
    mu_c = DiscreteMeasure(x, np.full(m, 1.0 / m))
    right = np.concatenate([x + 3.0**k for k in (1, 2)])
    left = np.concatenate([-2.0 * x - 3.0**k for k in (1, 2)])
    side_w = np.full(2 * m, 0.5 / m)
    return mu_c, DiscreteMeasure(right, side_w), DiscreteMeasure(left, side_w)


def build_counterexample_measure(d: int, n: int) -> DiscreteMeasure:
    """The mixed measure ``(mu_L + mu_C + mu_R) / 3``.

    Atoms are ordered C block, then R, then L, following
    :func:`build_counterexample_parts`.
    """
    mu_c, mu_r, mu_l = build_counterexample_parts(d, n)
    return mixture([mu_c, mu_r, mu_l], [1 / 3, 1 / 3, 1 / 3])


def build_equal_mass_counterexample(m: int) -> DiscreteMeasure:
    """Equal-mass atomization of the one-dimensional mixed measure with ``m`` atoms.

    The C block gets ``m/3`` midpoint atoms and every side block ``m/6``, so
    each atom has mass ``1/m``. The grids are not aligned, unlike
    :func:`build_counterexample_parts`.
    """
    if int(m) != m or m < 6 or m % 6:
        raise InvalidInput(f"m must be a positive multiple of 6, got {m!r}")
    m = int(m)
    layout = BlockLayout.counterexample(1)
    pts = [_midpoint_axis(*layout.blocks["C"][0], m // 3)]
    for label in ("R1", "R2", "L1", "L2"):
        pts.append(_midpoint_axis(*layout.blocks[label][0], m // 6))
    pts = np.concatenate(pts)
    return DiscreteMeasure(pts, np.full(m, 1.0 / m))


def equivalent(mu: DiscreteMeasure, nu: DiscreteMeasure, tol: float = 1e-12) -> bool:
    """Order-insensitive equality: same atom set, weights equal within ``tol``.

    Zero-weight atoms are ignored.
    """
    if mu.dim != nu.dim:
        return False
    a_keep, b_keep = mu.weights > 0, nu.weights > 0
    a_pts, b_pts = mu.points[a_keep], nu.points[b_keep]
    if a_pts.shape != b_pts.shape:
        return False
    ia = np.lexsort(a_pts.T[::-1])
    ib = np.lexsort(b_pts.T[::-1])
    return bool(
        np.array_equal(a_pts[ia], b_pts[ib])
        and np.all(np.abs(mu.weights[a_keep][ia] - nu.weights[b_keep][ib]) <= tol)
    )
