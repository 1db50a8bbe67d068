"""Seeded random instances for tests, benchmarks and the acceptance suite."""
from __future__ import annotations

import numpy as np

from .core.model import FiniteMDP, POMDPModel
from .core.utility import DiscountSpec, SumOfExponentials


def _stochastic(rng, shape, sparsity=0.0):
    p = rng.random(shape) + 0.05
    if sparsity:
        p[rng.random(shape) < sparsity] = 0.0
        rows = p.sum(axis=-1) == 0
        p[rows, 0] = 1.0
    return p / p.sum(axis=-1, keepdims=True)


def random_terms(rng, k):
    lam = rng.uniform(0.3, 2.0, k) * rng.choice([-1.0, 1.0], k)
    w = rng.uniform(0.5, 2.0, k)
    return tuple(zip(w.tolist(), lam.tolist()))


def random_mdp(rng, n_states=2, n_actions=2, k=1, integer_costs=False, beta=None,
               cost_range=(0.5, 2.0), utility=None) -> FiniteMDP:
    """Random fully feasible MDP.  ``integer_costs`` draws costs from {1, 2} so
    that different paths can reach the same accumulated cost."""
    shape = (n_states, n_actions, n_states)
    kernel = _stochastic(rng, shape)
    lo, hi = cost_range
    if integer_costs:
        costs = rng.integers(1, 3, (k,) + shape).astype(float)
        lo, hi = 1.0, 2.0
    else:
        costs = rng.uniform(lo, hi, (k,) + shape)
    u = SumOfExponentials(random_terms(rng, k)) if utility is None else utility
    return FiniteMDP(
        states=[f"x{i}" for i in range(n_states)],
        actions=[f"a{i}" for i in range(n_actions)],
        feasible=np.ones((n_states, n_actions), dtype=bool),
        kernel=kernel, costs=costs, lower=[lo] * k, upper=[hi] * k,
        utility=u, discount=DiscountSpec(None if beta is None else tuple(beta)),
    )


def random_pomdp(rng, n_hidden=2, n_obs=2, n_actions=2, k=1, signal_sparsity=0.2) -> POMDPModel:
    """Random POMDP; some signal entries are zero so that observations can be impossible."""
    return POMDPModel(
        hidden_states=[f"s{i}" for i in range(n_hidden)],
        observations=[f"y{i}" for i in range(n_obs)],
        actions=[f"a{i}" for i in range(n_actions)],
        transition=_stochastic(rng, (n_actions, n_hidden, n_hidden)),
        signal=_stochastic(rng, (n_hidden, n_obs), signal_sparsity),
        cost=rng.uniform(-1.0, 1.0, (n_hidden, n_actions)),
        terms=random_terms(rng, k),
    )


def random_distribution(rng, n):
    p = rng.random(n) + 0.1
    return p / p.sum()


def random_discounted_mdp(rng, n_states=2, n_actions=2, k=1, beta_range=(0.05, 0.15),
                          slow_constant=None) -> FiniteMDP:
    """Discounted random MDP for the infinite-horizon solver.

    With ``slow_constant = (c, beta)`` an extra objective with constant cost
    ``c`` and discount ``beta`` is appended; its bracket contribution is zero.
    """
    beta = list(rng.uniform(*beta_range, k))
    m = random_mdp(rng, n_states, n_actions, k, beta=beta)
    if slow_constant is None:
        return m
    c, b = slow_constant
    costs = np.concatenate([m.costs, np.full((1,) + m.costs.shape[1:], float(c))])
    terms = m.utility.terms + random_terms(rng, 1)
    return FiniteMDP(
        states=m.states, actions=m.actions, feasible=m.feasible, kernel=m.kernel, costs=costs,
        lower=list(m.lower) + [c], upper=list(m.upper) + [c],
        utility=SumOfExponentials(terms), discount=DiscountSpec(tuple(beta) + (float(b),)),
    )


def random_absorbing_mdp(rng, n_absorbing=2, n_actions=2, k=1, beta=0.9, cost_range=(0.5, 1.0),
                         rate_range=(0.05, 0.3)) -> FiniteMDP:
    """Discounted MDP whose reachable augmented set grows only linearly.

    State ``x0`` is transient: every action keeps it there at the same cost or
    moves it into an absorbing state at an action-dependent cost.  Absorbing
    states repeat a constant cost.  So slow discounting can be solved exactly.
    """
    n = 1 + n_absorbing
    lo, hi = cost_range
    kernel = np.zeros((n, n_actions, n))
    costs = np.zeros((k, n, n_actions, n))
    stay_cost = rng.uniform(lo, hi, k)
    for a in range(n_actions):
        stay = rng.uniform(0.3, 0.8)
        kernel[0, a, 0] = stay
        kernel[0, a, 1:] = (1 - stay) * _stochastic(rng, (n_absorbing,))
        costs[:, 0, a, 0] = stay_cost
        costs[:, 0, a, 1:] = rng.uniform(lo, hi, (k, n_absorbing))
    for t in range(1, n):
        kernel[t, :, t] = 1.0
        costs[:, t, :, t] = rng.uniform(lo, hi, k)[:, None]
    lam = rng.uniform(*rate_range, k) * rng.choice([-1.0, 1.0], k)
    terms = tuple(zip(rng.uniform(0.5, 2.0, k).tolist(), lam.tolist()))
    betas = np.full(k, float(beta))
    betas[1:] = rng.uniform(0.5, beta, k - 1)
    return FiniteMDP(
        states=[f"x{i}" for i in range(n)],
        actions=[f"a{i}" for i in range(n_actions)],
        feasible=np.ones((n, n_actions), dtype=bool),
        kernel=kernel, costs=costs, lower=[lo] * k, upper=[hi] * k,
        utility=SumOfExponentials(terms), discount=DiscountSpec(tuple(betas.tolist())),
    )
