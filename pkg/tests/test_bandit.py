import itertools

import numpy as np
import pytest

from morsdp import bandit, bellman, oracle
from morsdp.core import dump_model, parse_model


@pytest.mark.parametrize("n,g,s,expected", [
    (0, 1.0, 1.0, 2.0),
    (1, 0.0, 0.0, 0.375),
    (2, 0.0, 0.0, 0.8125),
    (3, 1.0, 0.0, 2.5),
])
def test_analytic_value_examples(n, g, s, expected):
    assert bandit.analytic_value(n, g, s, 1.0) == expected


@pytest.mark.parametrize("g,expected", [(0.0, 0.5), (1.0, 0.0), (0.25, 0.25)])
def test_analytic_action_examples(g, expected):
    assert bandit.analytic_action(g, 1.0) == expected


def test_negative_holdings_rejected():
    with pytest.raises(ValueError):
        bandit.analytic_value(1, -0.1, 0.0, 1.0)


def test_mu_range():
    with pytest.raises(ValueError):
        bandit.BanditParams(2.5, 5)


def test_export_structure():
    m = bandit.as_mdp(bandit.BanditParams(1.0, 3))
    assert m.actions == ("0", "0.5", "1")
    assert np.all(m.kernel == 0.25)
    m2 = parse_model(dump_model(m))
    assert m2.actions == m.actions and np.array_equal(m2.costs, m.costs)


@pytest.mark.parametrize("mu", [0.5, 1.0, 2.0])
def test_induction_step_matches_closed_form(mu):
    """analytic_value(n+1) = min over the grid of the averaged analytic_value(n)."""
    grid = np.linspace(0, 1, 5)
    for n, g, s in itertools.product(range(4), (0.0, 0.25, 0.5, 1.0), (0.0, 0.5)):
        best = min(
            0.25 * sum(bandit.analytic_value(n, g + a * xg, s + (1 - a) * xs, mu)
                       for xg in (0, 1) for xs in (0, 1))
            for a in grid
        )
        assert abs(best - bandit.analytic_value(n + 1, g, s, mu)) <= 1e-12


def test_optimal_first_action():
    m = bandit.as_mdp(bandit.BanditParams(1.0, 5))
    sol = bellman.solve_finite(m, N=3, x0="00")
    assert float(sol.policy(("00",))) == bandit.analytic_action(0.0, 1.0)


def test_oracle_agrees_on_coarse_grid():
    m = bandit.as_mdp(bandit.BanditParams(1.0, 3))
    assert abs(oracle.enumerate_mdp_policies(m, N=2, x0="00") - bandit.analytic_value(2, 0, 0, 1.0)) <= 1e-12


def test_coarse_grid_error_is_nonnegative():
    """A grid missing the optimum can only do worse than the closed form."""
    m = bandit.as_mdp(bandit.BanditParams(0.6, 3))  # optimum 0.3 is off the grid
    v = bellman.solve_finite(m, N=2, x0="00").value
    gap = v - bandit.analytic_value(2, 0.0, 0.0, 0.6)
    assert 0 < gap < 0.05
