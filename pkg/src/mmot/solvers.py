"""Kantorovich and Monge minimization over discrete couplings."""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg
from scipy import sparse
from scipy.optimize import Bounds, LinearConstraint, linprog, milp
from scipy.special import logsumexp

from .constructors import MongeTuple
from .costs import CostSpec, cost_of_tuples, cost_tensor
from .errors import BudgetExceeded, InvalidInput, NotEquallyWeighted, SolverFailure, Unconverged
from .measures import DiscreteMeasure
from .plans import SparsePlan

MONGE_BUDGET = 10**7


@dataclass
class SolveReport:
    """Outcome of one solve: value, plan and diagnostics."""

    value: float
    plan: SparsePlan
    method: str
    iterations: int
    residuals: dict = field(default_factory=dict)
    wall_time: float = 0.0
    converged: bool = True
    extra: dict = field(default_factory=dict)


def _prune(measures: Sequence[DiscreteMeasure]):
    """Drop zero-weight atoms; return reduced measures and kept index arrays."""
    kept = [np.flatnonzero(mu.weights > 0) for mu in measures]
    reduced = [
        mu if k.size == mu.size else DiscreteMeasure(mu.points[k], mu.weights[k] / mu.weights[k].sum())
        for mu, k in zip(measures, kept)
    ]
    return reduced, kept


def _marginal_matrix(shape):
    """Sparse constraint matrix, one row per atom per marginal, first row block complete.

    One row is dropped from every later block; the full system has rank
    ``sum(n_j) - N + 1``.
    """
    size = int(np.prod(shape))
    cols = np.arange(size)
    multi = np.unravel_index(cols, shape)
    rows, blocks = [], []
    for j, n in enumerate(shape):
        keep = n if j == 0 else n - 1
        r = multi[j]
        mask = r < keep
        rows.append(sparse.csr_matrix((np.ones(mask.sum()), (r[mask], cols[mask])), shape=(keep, size)))
        blocks.append((j, keep))
    return sparse.vstack(rows).tocsc(), blocks


def _rhs(measures, blocks):
    return np.concatenate([measures[j].weights[:keep] for j, keep in blocks])


def _polish(A, b, x, support):
    """Re-solve the support columns for exact vertex masses."""
    cols = A[:, support].toarray()
    sol, *_ = scipy.linalg.lstsq(cols, b, lapack_driver="gelsy")
    if np.all(sol >= -1e-14) and np.max(np.abs(cols @ sol - b)) <= 1e-13:
        out = np.zeros_like(x)
        out[support] = np.clip(sol, 0.0, None)
        return out
    return x


def solve_lp(
    measures: Sequence[DiscreteMeasure],
    spec: CostSpec,
    cost: np.ndarray | None = None,
    support_tol: float = 1e-12,
) -> SolveReport:
    """Exact discrete Kantorovich problem via the HiGHS dual simplex.

    Minimizes ``<cost tensor, gamma>`` under the ``N`` marginal constraints and
    returns a basic (vertex) solution, so the plan has at most
    ``sum(n_j) - N + 1`` atoms. ``cost`` overrides the tensor built from
    ``spec`` (used for perturbation checks).
    """
    t0 = time.perf_counter()
    reduced, kept = _prune(measures)
    C = cost_tensor(spec, reduced) if cost is None else np.asarray(cost, dtype=float)
    if cost is not None and len(kept) and any(k.size != mu.size for k, mu in zip(kept, measures)):
        C = C[np.ix_(*kept)]
    shape = C.shape
    A, blocks = _marginal_matrix(shape)
    b = _rhs(reduced, blocks)
    c = C.ravel()
    res = linprog(
        c,
        A_eq=A,
        b_eq=b,
        bounds=(0, None),
        method="highs-ds",
        options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
    )
    if res.status != 0 or res.x is None:
        raise SolverFailure(f"LP solve failed: {res.message}", diagnostics={"status": int(res.status)})
    x = np.asarray(res.x, dtype=float)
    support = np.flatnonzero(x > support_tol)
    x = _polish(A, b, x, support)
    support = np.flatnonzero(x > support_tol)
    mass = x[support] / x[support].sum()
    value = math.fsum(c[support] * mass)
    y = np.asarray(res.eqlin.marginals, dtype=float)
    dual_value = float(b @ y)
    reduced_costs = c - A.T @ y
    multi = np.array(np.unravel_index(support, shape)).T
    idx = np.column_stack([kept[j][multi[:, j]] for j in range(len(shape))])
    plan = SparsePlan.from_atoms(measures, idx, mass)
    residuals = {
        "marginal_violation": plan.feasibility_residual(),
        "duality_gap": abs(value - dual_value),
        "dual_infeasibility": float(max(0.0, -reduced_costs.min())),
    }
    return SolveReport(
        value=value,
        plan=plan,
        method="lp_exact",
        iterations=int(res.nit),
        residuals=residuals,
        wall_time=time.perf_counter() - t0,
        extra={"dual_value": dual_value, "support_size": int(support.size)},
    )


def perturbation_check(
    measures: Sequence[DiscreteMeasure], spec: CostSpec, scale: float = 1e-7, seed: int = 0
) -> dict:
    """Re-solve with a small deterministic cost jitter and compare supports.

    An unchanged support witnesses that the unperturbed optimum is an
    isolated (unique) vertex.
    """
    base = solve_lp(measures, spec)
    C = cost_tensor(spec, measures)
    rng = np.random.default_rng(seed)
    jittered = solve_lp(measures, spec, cost=C + scale * rng.uniform(-1.0, 1.0, C.shape))
    same = base.plan.support() == jittered.plan.support()
    return {"unchanged_support": bool(same), "base": base, "perturbed": jittered, "scale": scale}


# -- entropic ------------------------------------------------------------------


class _EntropicDual:
    """Dual of the entropic problem on a dense cost tensor, potentials stacked."""

    def __init__(self, C, log_a, eps):
        self.C, self.eps = C, eps
        self.shape = C.shape
        self.N = C.ndim
        self.log_a = log_a
        self.a = [np.exp(la) for la in log_a]
        self.split = np.cumsum([0, *self.shape])

    def unpack(self, z):
        return [z[self.split[j] : self.split[j + 1]] for j in range(self.N)]

    def lifted(self, fj, j):
        view = [1] * self.N
        view[j] = self.shape[j]
        return fj.reshape(view)

    def others(self, j, n=None):
        return tuple(a for a in range(n or self.N) if a != j)

    def plan(self, f):
        return np.exp((sum(self.lifted(fj, j) for j, fj in enumerate(f)) - self.C) / self.eps)

    def objective(self, f):
        return float(sum(fj @ aj for fj, aj in zip(f, self.a)) - self.eps * self.plan(f).sum())

    def violation(self, P):
        return max(float(np.abs(P.sum(axis=self.others(j)) - aj).sum()) for j, aj in enumerate(self.a))

    def sweep(self, f):
        for j in range(self.N):
            rest = (sum(self.lifted(f[l], l) for l in range(self.N) if l != j) - self.C) / self.eps
            f[j] = self.eps * (self.log_a[j] - logsumexp(rest, axis=self.others(j)))
        return f

    def newton(self, f):
        """One damped Newton ascent step; the gauge null space is handled by lstsq."""
        P = self.plan(f)
        margs = [P.sum(axis=self.others(j)) for j in range(self.N)]
        grad = np.concatenate([aj - mj for aj, mj in zip(self.a, margs)])
        size = self.split[-1]
        H = np.zeros((size, size))
        for j in range(self.N):
            sj = slice(self.split[j], self.split[j + 1])
            H[sj, sj] = np.diag(margs[j])
            for l in range(j + 1, self.N):
                sl = slice(self.split[l], self.split[l + 1])
                pair = P.sum(axis=tuple(a for a in range(self.N) if a not in (j, l)))
                H[sj, sl] = pair
                H[sl, sj] = pair.T
        step, *_ = np.linalg.lstsq(H / self.eps, grad, rcond=1e-14)
        z = np.concatenate(f)
        base = self.objective(f)
        t = 1.0
        while t > 1e-10:
            cand = self.unpack(z + t * step)
            if self.objective(cand) >= base + 1e-4 * t * (grad @ step):
                return cand
            t *= 0.5
        return f


def solve_sinkhorn(
    measures: Sequence[DiscreteMeasure],
    spec: CostSpec,
    epsilon: float,
    max_iter: int = 10_000,
    tol: float = 1e-10,
    anneal: bool = True,
    newton_after: int = 200,
) -> SolveReport:
    """Multi-marginal Sinkhorn in the log domain.

    The plan is ``exp((f_1 + ... + f_N - C) / epsilon)``; each sweep refits
    every potential ``f_j`` to its marginal with a log-sum-exp. Iteration
    stops once every marginal's L1 violation is below ``tol``. The reported
    value is the transport cost ``<C, P>``; ``residuals["entropy_slack"]`` is
    ``epsilon * log(prod n_j)``, the gap allowed below the LP value.

    With ``anneal`` the potentials are warm-started along a geometric
    schedule from the cost range down to ``epsilon`` (doubling steps).
    Sweeps contract at a rate that degrades like ``exp(-range/epsilon)``, so
    after ``newton_after`` sweeps at the target epsilon the remaining
    iterations are damped Newton steps on the same dual.

    Raises ``Unconverged`` (with the partial report attached) when
    ``max_iter`` iterations do not suffice.
    """
    if not epsilon > 0:
        raise InvalidInput("epsilon must be positive")
    t0 = time.perf_counter()
    reduced, kept = _prune(measures)
    C = cost_tensor(spec, reduced)
    N = len(reduced)
    shape = C.shape
    log_a = [np.log(mu.weights) for mu in reduced]
    f = [np.zeros(n) for n in shape]

    schedule = [float(epsilon)]
    if anneal:
        span = float(C.max() - C.min())
        while schedule[-1] * 2 < span:
            schedule.append(schedule[-1] * 2)
        schedule.reverse()

    it = newton_steps = 0
    for stage, eps in enumerate(schedule):
        dual = _EntropicDual(C, log_a, eps)
        final = stage == len(schedule) - 1
        stage_tol = tol if final else max(tol, 1e-6)
        sweeps = newton_after if final else 200
        while it < max_iter:
            if sweeps > 0:
                f = dual.sweep(f)
                sweeps -= 1
            elif final:
                f = dual.newton(f)
                newton_steps += 1
            else:
                break
            it += 1
            if dual.violation(dual.plan(f)) < stage_tol:
                break
    dual = _EntropicDual(C, log_a, epsilon)
    P = dual.plan(f)
    violation = dual.violation(P)
    value = float((C * P).sum())
    nz = np.argwhere(P > 0)
    idx = np.column_stack([kept[j][nz[:, j]] for j in range(N)])
    mass = P[tuple(nz.T)]
    converged = violation < tol
    plan = SparsePlan.from_atoms(measures, idx, mass / mass.sum(), check=converged)
    report = SolveReport(
        value=value,
        plan=plan,
        method="sinkhorn",
        iterations=it,
        residuals={
            "marginal_violation": violation,
            "entropy_slack": float(epsilon * np.log(np.prod(shape, dtype=float))),
        },
        wall_time=time.perf_counter() - t0,
        converged=converged,
        extra={"epsilon": epsilon, "schedule": schedule, "newton_steps": newton_steps},
    )
    if not converged:
        raise Unconverged(f"Sinkhorn did not reach tol={tol} in {max_iter} iterations", report=report)
    return report


# -- Monge -----------------------------------------------------------------------


def _check_equal_masses(mu: DiscreteMeasure):
    if not np.allclose(mu.weights, 1.0 / mu.size, rtol=0, atol=1e-15):
        raise NotEquallyWeighted("Monge search needs atoms of equal mass")


def _exhaustive(C: np.ndarray, N: int):
    m = C.shape[0]
    perms = np.array(list(itertools.permutations(range(m))))
    rows = np.arange(m)
    best_val, best = np.inf, None
    evaluated = 0
    for head in itertools.product(range(len(perms)), repeat=N - 2):
        fixed = [perms[h] for h in head]
        # totals over every choice of the last map, summed row by row
        totals = np.zeros(len(perms))
        for i in range(m):
            totals += C[(rows[i], *[p[i] for p in fixed])][perms[:, i]]
        evaluated += len(perms)
        k = int(np.argmin(totals))
        if totals[k] < best_val - 1e-12:
            best_val, best = float(totals[k]), [*fixed, perms[k]]
    return best_val / m, best, evaluated


def _assignment(C: np.ndarray):
    """Axial N-index assignment as a 0/1 program over the full tensor."""
    m, N = C.shape[0], C.ndim
    A, _ = _marginal_matrix(C.shape)
    res = milp(
        C.ravel(),
        constraints=LinearConstraint(A, 1.0, 1.0),
        integrality=np.ones(C.size),
        bounds=Bounds(0.0, 1.0),
    )
    if res.x is None:
        raise SolverFailure(f"MILP failed: {res.message}", diagnostics={"status": res.status})
    chosen = np.argwhere(res.x.reshape(C.shape) > 0.5)
    chosen = chosen[np.argsort(chosen[:, 0])]
    if len(chosen) != m or not np.array_equal(chosen[:, 0], np.arange(m)):
        raise SolverFailure("MILP returned a non-assignment", diagnostics={"atoms": chosen.tolist()})
    maps = [chosen[:, j].copy() for j in range(1, N)]
    return float(C[tuple(chosen.T)].sum()) / m, maps, int(getattr(res, "mip_node_count", 0) or 0)


def _row_costs(kind, X, maps):
    tuples = np.stack([X] + [X[s] for s in maps], axis=1)
    return cost_of_tuples(kind, tuples)


def _hill_climb(kind, X, maps):
    m = X.shape[0]
    maps = [s.copy() for s in maps]
    rows = _row_costs(kind, X, maps)
    pairs = np.array([(p, q) for p in range(m) for q in range(p + 1, m)])
    steps = 0
    if len(pairs) == 0:
        return maps, float(rows.mean()), steps
    while True:
        best_delta, best_move = -1e-12, None
        for k in range(len(maps)):
            p, q = pairs[:, 0], pairs[:, 1]
            # rows p and q after exchanging their images under map k
            tup_p = np.stack([X[p]] + [X[s[q]] if t == k else X[s[p]] for t, s in enumerate(maps)], axis=1)
            tup_q = np.stack([X[q]] + [X[s[p]] if t == k else X[s[q]] for t, s in enumerate(maps)], axis=1)
            delta = cost_of_tuples(kind, tup_p) + cost_of_tuples(kind, tup_q) - rows[p] - rows[q]
            a = int(np.argmin(delta))
            if delta[a] < best_delta:
                best_delta, best_move = float(delta[a]), (k, int(p[a]), int(q[a]))
        if best_move is None:
            break
        k, p, q = best_move
        maps[k][[p, q]] = maps[k][[q, p]]
        rows = _row_costs(kind, X, maps)
        steps += 1
    return maps, float(rows.mean()), steps


def monge_search(
    mu: DiscreteMeasure,
    spec: CostSpec,
    N: int | None = None,
    mode: str = "exhaustive",
    seed: int = 0,
    restarts: int = 32,
    budget: int = MONGE_BUDGET,
) -> SolveReport:
    """Best map-induced plan with all marginals equal to ``mu``.

    With equal atom masses the admissible maps are exactly the permutations
    of the atoms, so a candidate is a tuple of ``N-1`` permutations.
    ``exhaustive`` enumerates all ``(m!)^(N-1)`` tuples (global Monge
    optimum); ``local`` runs best-improvement 2-swap descent from the
    identity and ``restarts`` random starts (seeded), an upper bound.
    ``assignment`` solves the same problem exactly as a 0/1 program (an
    axial N-index assignment), which reaches sizes beyond enumeration.
    """
    t0 = time.perf_counter()
    N = spec.N if N is None else N
    if N != spec.N:
        raise InvalidInput("N disagrees with the cost")
    _check_equal_masses(mu)
    m = mu.size
    if mode == "exhaustive":
        if math.factorial(m) ** (N - 1) > budget:
            raise BudgetExceeded(f"(m!)^(N-1) = ({m}!)^{N - 1} exceeds the budget {budget}")
        C = cost_tensor(spec, [mu] * N)
        if N == 1:
            raise InvalidInput("need N >= 2")
        value, maps, evaluated = _exhaustive(C, N)
        iterations = evaluated
    elif mode == "local":
        rng = np.random.default_rng(seed)
        starts = [[np.arange(m) for _ in range(N - 1)]]
        starts += [[rng.permutation(m) for _ in range(N - 1)] for _ in range(restarts)]
        value, maps, iterations = np.inf, None, 0
        for start in starts:
            cand, val, steps = _hill_climb(spec.kind, mu.points, start)
            iterations += steps
            if val < value - 1e-12:
                value, maps = val, cand
    elif mode == "assignment":
        value, maps, iterations = _assignment(cost_tensor(spec, [mu] * N))
    else:
        raise InvalidInput(f"unknown mode {mode!r}")
    tup = MongeTuple(mu, tuple(maps))
    plan = tup.to_plan()
    return SolveReport(
        value=float(value),
        plan=plan,
        method="monge_search",
        iterations=int(iterations),
        residuals={"marginal_violation": plan.feasibility_residual()},
        wall_time=time.perf_counter() - t0,
        extra={"mode": mode, "maps": [s.tolist() for s in tup.maps], "seed": seed if mode == "local" else None},
    )
