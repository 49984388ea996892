"""Optimality certificates for costs of the form h(x_1 + ... + x_N) with h = |.|^2."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .costs import CostSpec
from .errors import InfeasiblePlan, InvalidInput, Unsupported
from .measures import DiscreteMeasure
from .plans import FEASIBILITY_TOL, SparsePlan

CERTIFIED = "certified_optimal"
GAP_REPORTED = "gap_reported"


@dataclass(frozen=True)
class Certificate:
    """Hyperplane certificate for a coupling.

    Attributes
    ----------
    k : ndarray, shape (d,)
        Sum of the marginal means; every coupling has ``E[x_1+...+x_N] = k``.
    max_deviation : float
        Largest ``|x_1+...+x_N - k|`` over atoms of positive mass.
    jensen_bound : float
        ``|k|^2``, the value of ``h`` at ``k`` and a lower bound on the
        sum-square cost of any coupling with these marginals.
    plan_sum_square_cost : float
    gap : float
        ``plan_sum_square_cost - jensen_bound``, evaluated as the variance of
        the tuple sum so that it is exactly zero on the hyperplane.
    verdict : str
        ``"certified_optimal"`` or ``"gap_reported"``.
    tol : float
        Deviation tolerance used for the verdict.
    """

    k: np.ndarray
    max_deviation: float
    jensen_bound: float
    plan_sum_square_cost: float
    gap: float
    verdict: str
    tol: float

    @property
    def certified(self) -> bool:
        return self.verdict == CERTIFIED


def _split(a: np.ndarray):
    c = 134217729.0 * a  # 2**27 + 1
    hi = c - (c - a)
    return hi, a - hi


def _two_product(a: np.ndarray, b: np.ndarray):
    """``a * b = p + e`` exactly, elementwise (Dekker's product)."""
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    e = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    return p, e


def _sum_of_means(measures: Sequence[DiscreteMeasure]) -> np.ndarray:
    """``sum_j mean(mu_j)`` per axis, correctly rounded from the exact value."""
    d = measures[0].dim
    if any(mu.dim != d for mu in measures):
        raise InvalidInput("marginals live in different dimensions")
    out = np.empty(d)
    for a in range(d):
        terms = []
        for mu in measures:
            p, e = _two_product(mu.weights, mu.points[:, a])
            terms.extend((p, e))
        out[a] = math.fsum(np.concatenate(terms))
    return out


def jensen_bound(measures: Sequence[DiscreteMeasure]) -> float:
    """``|sum_j mean(mu_j)|^2``, a lower bound on the sum-square cost of every coupling."""
    if not measures:
        raise InvalidInput("need at least one marginal")
    k = _sum_of_means(measures)
    return float(k @ k)


def default_tolerance(gamma: SparsePlan) -> float:
    """``1e-9 * (1 + diam^2)`` with ``diam`` the diagonal of the support's bounding box."""
    if len(gamma) == 0:
        return 1e-9
    pts = gamma.coordinates().reshape(-1, gamma.d)
    diam = float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))
    return 1e-9 * (1.0 + diam**2)


def hyperplane_certificate(gamma: SparsePlan, tol: float | None = None) -> Certificate:
    """Check whether ``gamma`` lives on the hyperplane ``x_1 + ... + x_N = k``.

    A coupling concentrated on that hyperplane minimizes ``|x_1+...+x_N|^2``
    (and hence the repulsive harmonic cost) among all couplings with the same
    marginals, since its cost meets the Jensen bound ``|k|^2``.

    Raises
    ------
    InfeasiblePlan
        If the plan does not reproduce its marginals within tolerance.
    """
    resid = gamma.feasibility_residual()
    if resid > FEASIBILITY_TOL:
        raise InfeasiblePlan(f"marginal residual {resid:.3e}")
    tol = default_tolerance(gamma) if tol is None else float(tol)
    k = _sum_of_means(gamma.marginals)
    dev = gamma.tuple_sums() - k
    norms = np.sqrt((dev**2).sum(axis=1))
    positive = gamma.mass > 0
    max_dev = float(norms[positive].max()) if positive.any() else 0.0
    sq = (gamma.tuple_sums() ** 2).sum(axis=1)
    cost = math.fsum(gamma.mass * sq)
    gap = math.fsum(gamma.mass * norms**2)
    bound = float(k @ k)
    return Certificate(
        k=k,
        max_deviation=max_dev,
        jensen_bound=bound,
        plan_sum_square_cost=cost,
        gap=gap,
        verdict=CERTIFIED if max_dev <= tol else GAP_REPORTED,
        tol=tol,
    )


def optimality_gap(gamma: SparsePlan, spec: CostSpec) -> float:
    """Distance of ``gamma`` above the Jensen bound.

    For the repulsive cost the marginal constant cancels, so the value is the
    same as for the sum-square cost.
    """
    if spec.kind == "attractive":
        raise Unsupported("no hyperplane certificate for the attractive cost; use the LP duality gap")
    if spec.N != gamma.N:
        raise InvalidInput(f"cost expects N={spec.N}, plan has N={gamma.N}")
    return hyperplane_certificate(gamma).gap
