import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mmot.costs import CostSpec, cost_tensor, decompose_constant, eval_cost
from mmot.errors import InvalidInput, TensorTooLarge
from mmot.measures import DiscreteMeasure, build_counterexample_parts, discretize_uniform_box, moments
from mmot.plans import plan_cost, random_vertex_plan

from conftest import measures_1d
from oracles import frac_cost


def test_spec_validation():
    assert CostSpec("sum-square", 3).kind == "sum_square"
    with pytest.raises(InvalidInput):
        CostSpec("repulsive", 1)
    with pytest.raises(InvalidInput):
        CostSpec("repulsive", 3, d=0)
    with pytest.raises(InvalidInput):
        CostSpec("quartic", 3)


@pytest.mark.parametrize("kind, expected", [("repulsive", -54.0), ("attractive", 54.0), ("sum_square", 0.0)])
def test_eval_cost_examples(kind, expected):
    assert eval_cost(CostSpec(kind, 3), [[0.0], [3.0], [-3.0]]) == expected


def test_eval_cost_shape_mismatch():
    with pytest.raises(InvalidInput):
        eval_cost(CostSpec("repulsive", 3), [[0.0], [1.0]])
    with pytest.raises(InvalidInput):
        eval_cost(CostSpec("repulsive", 3, d=2), [[0.0], [1.0], [2.0]])


@given(st.lists(st.integers(-40, 40), min_size=3, max_size=3), st.sampled_from(["attractive", "repulsive", "sum_square"]))
def test_eval_cost_matches_rational_oracle(xs, kind):
    pts = [x / 4 for x in xs]
    got = eval_cost(CostSpec(kind, 3), [[p] for p in pts])
    assert got == pytest.approx(float(frac_cost(kind, pts)), abs=1e-12)


@given(st.lists(st.floats(-10, 10), min_size=4, max_size=4), st.permutations(range(4)))
def test_eval_cost_symmetry_and_sign(xs, perm):
    tup = [[x] for x in xs]
    rep, att = CostSpec("repulsive", 4), CostSpec("attractive", 4)
    assert eval_cost(att, tup) == -eval_cost(rep, tup)
    assert eval_cost(rep, [tup[p] for p in perm]) == pytest.approx(eval_cost(rep, tup), rel=1e-12, abs=1e-12)


def test_cost_tensor_examples():
    two = DiscreteMeasure([[0.0], [1.0]], [0.5, 0.5])
    C = cost_tensor(CostSpec("repulsive", 2), [two, two])
    assert C.tolist() == [[0.0, -1.0], [-1.0, 0.0]]

    singles = [DiscreteMeasure([[x]], [1.0]) for x in (0.25, 3.25, -3.5)]
    assert cost_tensor(CostSpec("repulsive", 3), singles).item() == -68.625

    with pytest.raises(TensorTooLarge):
        cost_tensor(CostSpec("repulsive", 3), [two] * 3, cap=1)


def test_cost_tensor_cap_from_environment(monkeypatch):
    two = DiscreteMeasure([[0.0], [1.0]], [0.5, 0.5])
    monkeypatch.setenv("MMOT_TENSOR_CAP", "4")
    with pytest.raises(TensorTooLarge):
        cost_tensor(CostSpec("repulsive", 3), [two] * 3)


def test_cost_tensor_entries_match_eval_cost():
    mus = [discretize_uniform_box([[0, 1], [0, 2]], 2), discretize_uniform_box([[-1, 0], [0, 1]], 2)]
    spec = CostSpec("repulsive", 2, d=2)
    C = cost_tensor(spec, mus)
    for i, j in itertools.product(range(4), range(4)):
        assert C[i, j] == pytest.approx(eval_cost(spec, [mus[0].points[i], mus[1].points[j]]), abs=1e-14)


def test_decompose_constant_examples():
    rep3 = CostSpec("repulsive", 3)
    delta0 = DiscreteMeasure([[0.0]], [1.0])
    delta1 = DiscreteMeasure([[1.0]], [1.0])
    assert decompose_constant(CostSpec("repulsive", 2), [delta0, delta0]) == 0.0
    assert decompose_constant(rep3, [delta1] * 3) == 9.0
    parts = build_counterexample_parts(1, 64)
    assert decompose_constant(rep3, parts) == pytest.approx(298.5, abs=1e-3)
    with pytest.raises(InvalidInput):
        decompose_constant(CostSpec("attractive", 3), [delta1] * 3)


@given(st.lists(measures_1d(max_size=4), min_size=3, max_size=3), st.integers(0, 2**32 - 1))
def test_decomposition_identity_on_random_plans(mus, seed):
    rep, ss = CostSpec("repulsive", 3), CostSpec("sum_square", 3)
    gamma = random_vertex_plan(mus, np.random.default_rng(seed))
    const = decompose_constant(rep, mus)
    scale = sum(moments(m)[1] for m in mus)
    assert abs(plan_cost(rep, gamma) - plan_cost(ss, gamma) + const) <= 1e-9 * (1 + scale)
