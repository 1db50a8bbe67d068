import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from morsdp import bandit
from morsdp.core import (
    Expression,
    SumOfExponentials,
    check_monotone,
    dump_model,
    eval_utility,
    parse_model,
    parse_utility_expr,
    to_source,
)
from morsdp.core.expr import Add, Binary, Const, Mul, Pow, Var
from morsdp.core.utility import DiscountSpec
from morsdp.errors import (
    CostBoundError,
    FeasibilityError,
    ModelSyntaxError,
    StochasticityError,
    UtilityDomainError,
    UtilityError,
)


def two_state_doc(**overrides):
    doc = {
        "kind": "mdp",
        "states": ["x1", "x2"],
        "actions": ["a"],
        "transitions": [["x1", "a", "x1", 0.5], ["x1", "a", "x2", 0.5],
                        ["x2", "a", "x1", 0.5], ["x2", "a", "x2", 0.5]],
        "costs": [{"name": "c", "entries": [], "default": 1.0, "lower": 1.0, "upper": 1.0}],
        "utility": {"type": "sum_exp", "terms": [{"w": 1.0, "lambda": 1.0}]},
    }
    doc.update(overrides)
    return doc


def test_parse_two_state_model():
    m = parse_model(json.dumps(two_state_doc()))
    assert len(m.states) == 2
    np.testing.assert_allclose(m.kernel.sum(axis=2), 1.0)


def test_row_sum_error_names_pair():
    doc = two_state_doc(transitions=[["x1", "a", "x1", 0.4], ["x1", "a", "x2", 0.5],
                                     ["x2", "a", "x2", 1.0]])
    with pytest.raises(StochasticityError, match="'x1';'a'"):
        parse_model(json.dumps(doc))


def test_bandit_export_parses():
    m = parse_model(dump_model(bandit.as_mdp(bandit.BanditParams(1.0, 3))))
    assert len(m.states) == 4
    assert m.allow_zero_cost


def test_round_trip_keeps_kernel_and_costs():
    m = bandit.as_mdp(bandit.BanditParams(0.7, 4))
    m2 = parse_model(dump_model(m))
    assert np.array_equal(m.kernel, m2.kernel)
    assert np.array_equal(m.costs, m2.costs)
    d = np.random.default_rng(0).random((20, 2))
    assert np.array_equal(m.utility(d), m2.utility(d))


def test_empty_feasible_set():
    doc = two_state_doc(feasible={"x1": ["a"], "x2": []})
    with pytest.raises(FeasibilityError):
        parse_model(json.dumps(doc))


def test_nonpositive_lower_bound_reports_triple():
    doc = two_state_doc(costs=[{"entries": [["x1", "a", "x2", 0.0]], "default": 1.0,
                                "lower": 0.0, "upper": 1.0}])
    with pytest.raises(CostBoundError, match="offending triple \\('x1', 'a', 'x2'\\)"):
        parse_model(json.dumps(doc))


def test_cost_outside_declared_bounds():
    doc = two_state_doc(costs=[{"entries": [["x2", "a", "x1", 3.0]], "default": 1.0,
                                "lower": 0.5, "upper": 2.0}])
    with pytest.raises(CostBoundError, match="outside"):
        parse_model(json.dumps(doc))


def test_syntax_error_has_position():
    with pytest.raises(ModelSyntaxError, match="line 1 column"):
        parse_model('{"kind": "mdp",, }')


def test_unknown_key_rejected():
    with pytest.raises(ModelSyntaxError, match="unknown keys"):
        parse_model(json.dumps(two_state_doc(colour="blue")))


def test_pomdp_document():
    doc = {"kind": "pomdp", "hidden_states": ["s"], "observations": ["y"], "actions": ["a"],
           "transition": [["s", "a", "s", 1.0]], "signal": [["y", "s", 1.0]],
           "cost": [["s", "a", 0.3]], "terms": [{"w": 1.0, "lambda": -2.0}]}
    p = parse_model(json.dumps(doc))
    assert p.terms == ((1.0, -2.0),)
    assert parse_model(dump_model(p)).cost[0, 0] == 0.3


# ---------------------------------------------------------------- utilities


def test_parse_bandit_utility():
    ast = parse_utility_expr("d1^2 + 1.0*d2", 2)
    assert ast == Add(Pow(Var(1), Const(2.0)), Mul(Const(1.0), Var(2)))


def test_parse_identity():
    assert parse_utility_expr("d1", 1) == Var(1)


def test_precedence_and_associativity():
    assert parse_utility_expr("-d1^2", 1) == parse_utility_expr("-(d1^2)", 1)
    assert parse_utility_expr("2^3^2", 1) == parse_utility_expr("2^(3^2)", 1)
    assert parse_utility_expr("d1 - d1 - 1", 1) == parse_utility_expr("(d1 - d1) - 1", 1)


@pytest.mark.parametrize("src", ["d3", "x1 + 1", "d1 +", "2 $ d1", "exp(d1"])
def test_parse_errors(src):
    with pytest.raises(UtilityError):
        parse_utility_expr(src, 2)


def test_expression_matches_sum_of_exponentials():
    expr = Expression("exp(2*d1) - exp(-1*d2)", 2)
    sumexp = SumOfExponentials(((1.0, 2.0), (1.0, -1.0)))
    g = np.linspace(0.0, 3.0, 10)
    d = np.stack(np.meshgrid(g, g, indexing="ij"), axis=-1).reshape(-1, 2)
    assert np.max(np.abs(expr(d) - sumexp(d))) < 1e-12


def test_eval_examples():
    assert eval_utility(SumOfExponentials(((1.0, 1.0),)), [0.0]) == 1.0
    assert eval_utility(Expression("d1^2 + 1*d2", 2), [2.0, 3.0]) == 7.0
    assert eval_utility(SumOfExponentials(((2.0, -1.0),)), [0.0]) == -2.0


def test_large_exponent_does_not_overflow_early():
    u = SumOfExponentials(((1.0, 1.0), (1.0, -1.0)))
    v = u(np.array([700.0, 0.0]))
    assert np.isfinite(v) and v > 1e300


def test_log_domain_error():
    with pytest.raises(UtilityDomainError):
        eval_utility(Expression("log(d1 - 1)", 1), [0.5])


def test_decreasing_expression_rejected():
    with pytest.raises(UtilityError, match="decreases along d2"):
        check_monotone(Expression("d1 - d2^2", 2))


def test_discount_spec():
    assert DiscountSpec((0.5, 0.9)).beta_max == 0.9
    with pytest.raises(ValueError):
        DiscountSpec((1.0,))


node = st.recursive(
    st.one_of(st.floats(0.0, 10.0).map(Const), st.integers(1, 3).map(Var)),
    lambda kids: st.one_of(
        st.tuples(st.sampled_from("+-*/^"), kids, kids).map(lambda t: Binary(t[0], t[1], t[2])),
    ),
    max_leaves=8,
)


@given(node)
@settings(max_examples=200, deadline=None)
def test_print_parse_round_trip(ast):
    assert parse_utility_expr(to_source(ast), 3) == ast


terms = st.lists(st.tuples(st.floats(0.1, 5.0), st.floats(-3.0, 3.0).filter(lambda x: abs(x) > 1e-3)),
                 min_size=1, max_size=3)


@given(terms, st.data())
@settings(max_examples=200, deadline=None)
def test_sum_of_exponentials_is_monotone(ts, data):
    u = SumOfExponentials(tuple(ts))
    k = len(ts)
    d = np.array(data.draw(st.lists(st.floats(0.0, 20.0), min_size=k, max_size=k)))
    step = np.array(data.draw(st.lists(st.floats(0.0, 5.0), min_size=k, max_size=k)))
    lo, hi = u(d), u(d + step)
    assert lo <= hi + 1e-12 * max(1.0, abs(lo))
