"""Multi-marginal optimal transport with harmonic costs.

Discrete measures, sparse couplings, exact and entropic solvers, explicit
plan constructions and hyperplane optimality certificates.
"""

from .certify import Certificate, hyperplane_certificate, jensen_bound, optimality_gap
from .costs import CostSpec, cost_tensor, decompose_constant, eval_cost
from .measures import DiscreteMeasure, build_counterexample_measure, build_counterexample_parts, discretize_uniform_box
from .plans import SparsePlan, graph_multiplicity, marginal, plan_cost, symmetrize
from .solvers import SolveReport, monge_search, solve_lp, solve_sinkhorn

__all__ = [
    "Certificate",
    "CostSpec",
    "DiscreteMeasure",
    "SolveReport",
    "SparsePlan",
    "build_counterexample_measure",
    "build_counterexample_parts",
    "cost_tensor",
    "decompose_constant",
    "discretize_uniform_box",
    "eval_cost",
    "graph_multiplicity",
    "hyperplane_certificate",
    "jensen_bound",
    "marginal",
    "monge_search",
    "optimality_gap",
    "plan_cost",
    "solve_lp",
    "solve_sinkhorn",
    "symmetrize",
]
