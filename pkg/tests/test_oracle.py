import math

import numpy as np
import pytest

from morsdp import oracle
from morsdp.core.model import ObservationPolicy, POMDPModel
from morsdp.errors import BudgetError
from morsdp.instances import random_distribution, random_mdp, random_pomdp

# 50-digit recomputation (mpmath) of the instance built in fixture_instance()
FIXTURE_VALUE = 2.65233412507183553804690210482


def fixture_instance():
    rng = np.random.default_rng(7)
    p = random_pomdp(rng, 2, 2, 2, 2)
    theta0 = random_distribution(rng, 2)
    pol = ObservationPolicy({(): "a0", ("y0",): "a1", ("y1",): "a0"}, "a0")
    return p, theta0, pol


def test_regression_fixture():
    p, theta0, pol = fixture_instance()
    v = oracle.enumerate_pomdp(p, theta0, pol, 2).value
    assert abs(v - FIXTURE_VALUE) <= 1e-14 * FIXTURE_VALUE


def test_single_path():
    p = POMDPModel(["s"], ["y"], ["a"], [[[1.0]]], [[1.0]], [[0.6]], ((2.0, 1.5), (1.0, -0.5)))
    ev = oracle.enumerate_pomdp(p, [1.0], lambda ys: "a", 1)
    assert ev.atoms == 1
    assert abs(ev.value - (2 * math.exp(0.9) - math.exp(-0.3))) < 1e-15


@pytest.mark.parametrize("seed", range(5))
def test_measures_and_likelihood_ratio(seed):
    rng = np.random.default_rng(seed)
    p = random_pomdp(rng, 2, 3, 2, 1)
    theta0 = random_distribution(rng, 2)
    pol = ObservationPolicy({(): "a1"}, "a0")
    atoms = oracle.path_atoms(p, theta0, pol, 2)
    assert abs(math.fsum(a.prob_hat for a in atoms) - 1) <= 1e-12
    assert abs(math.fsum(a.prob_ref for a in atoms) - 1) <= 1e-12
    for a in atoms:
        assert abs(a.prob_hat - a.prob_ref * a.ratio) <= 1e-15
    lam = p.terms[0][1]
    lhs = math.fsum(a.prob_hat * math.exp(lam * a.cost) for a in atoms)
    rhs = math.fsum(a.prob_ref * a.ratio * math.exp(lam * a.cost) for a in atoms)
    assert abs(lhs - rhs) <= 1e-13 * abs(lhs)


def test_policy_enumeration_trivial_cases():
    p = random_pomdp(np.random.default_rng(1), 2, 2, 1, 1)
    v, pol = oracle.enumerate_pomdp_policies(p, [0.5, 0.5], 2)
    assert v == oracle.enumerate_pomdp(p, [0.5, 0.5], pol, 2).value
    q = random_pomdp(np.random.default_rng(2), 2, 2, 2, 1)
    v, _ = oracle.enumerate_pomdp_policies(q, [0.5, 0.5], 1)
    each = [oracle.enumerate_pomdp(q, [0.5, 0.5], lambda ys, a=a: a, 1).value for a in q.actions]
    assert v == min(each)


def test_budgets():
    p = random_pomdp(np.random.default_rng(3), 3, 3, 2, 1)
    with pytest.raises(BudgetError):
        oracle.enumerate_pomdp_policies(p, [1 / 3] * 3, 3, budget=100)
    with pytest.raises(BudgetError):
        oracle.enumerate_pomdp(p, [1 / 3] * 3, lambda ys: "a0", 3, budget=100)


@pytest.mark.parametrize("seed", range(6))
def test_markov_never_beats_history(seed):
    m = random_mdp(np.random.default_rng(seed), 2, 2, 2, integer_costs=True)
    h = oracle.enumerate_mdp_policies(m, N=2, cls="history")
    mk = oracle.enumerate_mdp_policies(m, N=2, cls="markov")
    assert mk >= h - 1e-12 and abs(mk - h) <= 1e-12 * max(1, abs(h))
    assert oracle.enumerate_mdp_policies(m, N=1, cls="markov") == oracle.enumerate_mdp_policies(m, N=1)


def test_path_count():
    m = random_mdp(np.random.default_rng(0), 2, 2, 1)
    assert oracle.count_mdp_paths(m, 0, 2) == (2 * 2) ** 2
