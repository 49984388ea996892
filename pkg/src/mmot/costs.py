"""Harmonic cost families on N-tuples of points in R^d."""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidInput, TensorTooLarge
from .measures import DiscreteMeasure, moments

KINDS = ("attractive", "repulsive", "sum_square")
DEFAULT_TENSOR_CAP = 10**7


@dataclass(frozen=True)
class CostSpec:
    """Selects the cost: ``attractive`` is the sum of pairwise squared
    distances, ``repulsive`` its negative, ``sum_square`` is ``|x_1+...+x_N|^2``.
    """

    kind: str
    N: int
    d: int = 1

    def __post_init__(self):
        kind = self.kind.replace("-", "_")
        if kind not in KINDS:
            raise InvalidInput(f"unknown cost kind {self.kind!r}; expected one of {KINDS}")
        if self.N < 2 or self.d < 1:
            raise InvalidInput("need N >= 2 and d >= 1")
        object.__setattr__(self, "kind", kind)


def tensor_cap() -> int:
    """Entry cap for dense tensors; ``MMOT_TENSOR_CAP`` overrides the default."""
    raw = os.environ.get("MMOT_TENSOR_CAP")
    if raw is None:
        return DEFAULT_TENSOR_CAP
    try:
        return int(float(raw))
    except ValueError as exc:
        raise InvalidInput(f"MMOT_TENSOR_CAP={raw!r} is not a number") from exc


def cost_of_tuples(kind: str, X: np.ndarray) -> np.ndarray:
    """Vectorized cost: ``X`` has shape ``(..., N, d)``, result ``(...)``."""
    X = np.asarray(X, dtype=float)
    if kind == "sum_square":
        s = X.sum(axis=-2)
        return np.einsum("...i,...i->...", s, s)
    N = X.shape[-2]
    total = np.zeros(X.shape[:-2])
    for i in range(N):
        for j in range(i + 1, N):
            diff = X[..., i, :] - X[..., j, :]
            total = total + np.einsum("...i,...i->...", diff, diff)
    if kind == "attractive":
        return total
    if kind == "repulsive":
        return -total
    raise InvalidInput(f"unknown cost kind {kind!r}")


def eval_cost(spec: CostSpec, tup) -> float:
    """Cost of one tuple given as an ``(N, d)`` array (or length-N list for d=1)."""
    X = np.asarray(tup, dtype=float)
    if X.ndim == 1 and spec.d == 1:
        X = X.reshape(-1, 1)
    if X.shape != (spec.N, spec.d):
        raise InvalidInput(f"tuple shape {X.shape} does not match (N, d) = ({spec.N}, {spec.d})")
    return float(cost_of_tuples(spec.kind, X))


def _check_measures(spec: CostSpec, measures: Sequence[DiscreteMeasure]):
    if len(measures) != spec.N:
        raise InvalidInput(f"expected {spec.N} marginals, got {len(measures)}")
    for mu in measures:
        if mu.dim != spec.d:
            raise InvalidInput(f"marginal of dimension {mu.dim}, cost expects {spec.d}")


def cost_tensor(spec: CostSpec, measures: Sequence[DiscreteMeasure], cap: int | None = None) -> np.ndarray:
    """Dense ``n_1 x ... x n_N`` tensor of costs over all atom tuples."""
    _check_measures(spec, measures)
    cap = tensor_cap() if cap is None else cap
    shape = tuple(mu.size for mu in measures)
    size = int(np.prod(shape, dtype=object))
    if size > cap:
        raise TensorTooLarge(f"cost tensor of shape {shape} has {size} entries > cap {cap}")

    N = spec.N

    def lift(j):
        # points of marginal j broadcast along axis j, trailing axis = coordinates
        view = [1] * N + [spec.d]
        view[j] = shape[j]
        return measures[j].points.reshape(view)

    if spec.kind == "sum_square":
        s = sum(lift(j) for j in range(N))
        return np.broadcast_to(np.einsum("...i,...i->...", s, s), shape).copy()
    total = np.zeros(shape)
    for i in range(N):
        for j in range(i + 1, N):
            diff = lift(i) - lift(j)
            total += np.einsum("...i,...i->...", diff, diff)
    return total if spec.kind == "attractive" else -total


def decompose_constant(spec: CostSpec, measures: Sequence[DiscreteMeasure]) -> float:
    """Plan-independent offset ``N * sum_j M2(mu_j)``.

    For every coupling of ``measures``, the repulsive cost equals the
    sum-square cost minus this value, by
    ``sum_{i<j} |x_i - x_j|^2 = N sum_i |x_i|^2 - |sum_i x_i|^2``.
    """
    if spec.kind != "repulsive":
        raise InvalidInput("the decomposition offset is defined for the repulsive cost")
    _check_measures(spec, measures)
    return spec.N * sum(moments(mu)[1] for mu in measures)
