"""Brute-force reference evaluators for tiny instances.

Nothing here shares code with the solvers beyond the model types: paths are
enumerated explicitly, sums use ``math.fsum`` in path-lexicographic order,
and policies are enumerated exhaustively.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np

from .core.model import FiniteMDP, ObservationPolicy, POMDPModel
from .core.utility import DiscountSpec
from .errors import BudgetError

DEFAULT_ATOMS = 10**7
DEFAULT_POLICIES = 10**5


@dataclass(frozen=True)
class PathAtom:
    """One joint path ``(s0, a0, s1, y1, ..., a_{N-1}, sN, yN)`` of a POMDP run."""

    path: Tuple
    prob_hat: float  # under the original measure
    prob_ref: float  # under the reference measure (uniform observations)
    ratio: float  # prod |Y| Q(y_k | s_k)
    cost: float  # sum of C(s_k, a_k)


def path_atoms(p: POMDPModel, theta0, policy: Callable, N: int, budget: int = DEFAULT_ATOMS):
    """All paths with positive probability under the reference measure."""
    S, Y = len(p.hidden_states), len(p.observations)
    if S ** (N + 1) * Y ** N > budget:
        raise BudgetError(f"{S ** (N + 1) * Y ** N} path atoms exceed the budget of {budget}")
    theta0 = [float(v) for v in theta0]
    out = []

    def walk(path, ys, s, ph, pr, r, c):
        if len(ys) == N:
            out.append(PathAtom(tuple(path), ph, pr, r, c))
            return
        a = p.actions.index(policy(ys))
        c2 = c + float(p.cost[s, a])
        for s2 in range(S):
            t = float(p.transition[a, s, s2])
            if t == 0:
                continue
            for y in range(Y):
                q = float(p.signal[s2, y])
                walk(path + [p.actions[a], p.hidden_states[s2], p.observations[y]],
                     ys + (p.observations[y],), s2,
                     ph * t * q, pr * t / Y, r * Y * q, c2)

    for s0 in range(S):
        if theta0[s0] > 0:
            walk([p.hidden_states[s0]], (), s0, theta0[s0], theta0[s0], 1.0, 0.0)
    return out


@dataclass(frozen=True)
class PomdpEvaluation:
    value: float
    per_term: np.ndarray  # E_hat[exp(lam_i * sum C)]
    atoms: int
    mass_hat: float
    mass_ref: float


def enumerate_pomdp(p: POMDPModel, theta0, policy: Callable, N: int,
                    budget: int = DEFAULT_ATOMS) -> PomdpEvaluation:
    """Exact performance of an observation-history policy.

    Per-term running costs include the model's ``cost_offset``.
    """
    atoms = path_atoms(p, theta0, policy, N, budget)
    per_term = []
    for (w, lam), off in zip(p.terms, p.cost_offset):
        per_term.append(math.fsum(at.prob_hat * math.exp(lam * (at.cost + N * off)) for at in atoms))
    value = math.fsum(w * math.copysign(1.0, lam) * e for (w, lam), e in zip(p.terms, per_term))
    return PomdpEvaluation(value, np.array(per_term), len(atoms),
                           math.fsum(a.prob_hat for a in atoms), math.fsum(a.prob_ref for a in atoms))


def _observation_nodes(p: POMDPModel, N: int):
    nodes = []
    for n in range(N):
        nodes += list(itertools.product(p.observations, repeat=n))
    return nodes


def enumerate_pomdp_policies(p: POMDPModel, theta0, N: int, budget: int = DEFAULT_POLICIES,
                             atom_budget: int = DEFAULT_ATOMS):
    """Minimum of :func:`enumerate_pomdp` over all deterministic observation-history policies.

    Policies are enumerated in lexicographic order of their action tables
    (nodes ordered by length, then observation order); the first minimizer wins.
    """
    nodes = _observation_nodes(p, N)
    count = len(p.actions) ** len(nodes)
    if count > budget:
        raise BudgetError(f"{count} policies exceed the budget of {budget}")
    best, best_policy = math.inf, None
    for choice in itertools.product(p.actions, repeat=len(nodes)):
        pol = ObservationPolicy(dict(zip(nodes, choice)), p.actions[0])
        v = enumerate_pomdp(p, theta0, pol, N, atom_budget).value
        if v < best:
            best, best_policy = v, pol
    return best, best_policy


# ------------------------------------------------------------------ MDP oracles


def _discount(m: FiniteMDP, disc):
    disc = m.discount if disc is None else disc
    k = m.n_objectives
    return disc.vector(k) if disc.discounted else np.ones(k)


def _utility(m, u):
    u = m.utility if u is None else u
    return lambda d: float(u(np.asarray(d, dtype=float)))


def _x0(m, x0):
    return x0 if isinstance(x0, (int, np.integer)) else m.states.index(str(x0))


def evaluate_mdp_policy(m: FiniteMDP, policy: Callable, N: int, x0=0, u=None,
                        disc: DiscountSpec = None) -> float:
    """Exact ``E[U(sum beta^k C)]`` for a deterministic history policy.

    ``policy`` receives the history ``(x0, a0, ..., xn)`` as indices and returns an action index.
    """
    beta = _discount(m, disc)
    U = _utility(m, u)
    parts = []

    def walk(hist, prob, d, z):
        n = len(hist) // 2
        if n == N:
            parts.append(prob * U(d))
            return
        x = hist[-1]
        a = policy(tuple(hist))
        if not m.feasible[x, a]:
            raise ValueError(f"policy chose an infeasible action at {hist}")
        for y in range(len(m.states)):
            pr = float(m.kernel[x, a, y])
            if pr > 0:
                walk(hist + [a, y], prob * pr, d + z * m.costs[:, x, a, y], z * beta)

    k = m.n_objectives
    walk([_x0(m, x0)], 1.0, np.zeros(k), np.ones(k))
    return math.fsum(parts)


def _history_optimum(m, U, beta, N, x0):
    def value(x, n, d, z):
        if n == N:
            return U(d)
        best = math.inf
        for a in m.feasible_actions(x):
            terms = []
            for y in range(len(m.states)):
                pr = float(m.kernel[x, a, y])
                if pr > 0:
                    terms.append(pr * value(y, n + 1, d + z * m.costs[:, x, a, y], z * beta))
            best = min(best, math.fsum(terms))
        return best

    k = m.n_objectives
    return value(x0, 0, np.zeros(k), np.ones(k))


def _markov_keys(m, beta, N, x0):
    """Reachable ``(n, x, d)`` keys, ``d`` rounded to 9 significant digits."""
    def key(n, x, d):
        return (n, x, tuple(float(f"{v:.9e}") for v in d))

    keys, frontier = [], {key(0, x0, np.zeros(m.n_objectives)): np.zeros(m.n_objectives)}
    z = np.ones(m.n_objectives)
    for n in range(N):
        keys += sorted(frontier)
        nxt = {}
        for (_, x, _), d in sorted(frontier.items()):
            for a in m.feasible_actions(x):
                for y in range(len(m.states)):
                    if m.kernel[x, a, y] > 0:
                        d2 = d + z * m.costs[:, x, a, y]
                        nxt.setdefault(key(n + 1, y, d2), d2)
        frontier = nxt
        z = z * beta
    return keys, key


def enumerate_mdp_policies(m: FiniteMDP, u=None, disc: DiscountSpec = None, x0=0, N: int = 1,
                           cls: str = "history", budget: int = DEFAULT_POLICIES) -> float:
    """Exact optimum over deterministic history policies or Markov rules on ``(n, x, d)``."""
    beta = _discount(m, disc)
    U = _utility(m, u)
    x0 = _x0(m, x0)
    if cls == "history":
        return _history_optimum(m, U, beta, N, x0)
    if cls != "markov":
        raise ValueError("cls must be 'markov' or 'history'")
    keys, key = _markov_keys(m, beta, N, x0)
    choices = [m.feasible_actions(x) for (_, x, _) in keys]
    count = math.prod(len(c) for c in choices)
    if count > budget:
        raise BudgetError(f"{count} Markov policies exceed the budget of {budget}")
    best = math.inf
    k = m.n_objectives
    for assign in itertools.product(*choices):
        rule = dict(zip(keys, assign))

        def policy(hist, rule=rule):
            d, z = np.zeros(k), np.ones(k)
            for j in range(0, len(hist) - 1, 2):
                d = d + z * m.costs[:, hist[j], hist[j + 1], hist[j + 2]]
                z = z * beta
            return rule[key(len(hist) // 2, hist[-1], d)]

        best = min(best, evaluate_mdp_policy(m, policy, N, x0, u, disc))
    return best


def count_mdp_paths(m: FiniteMDP, x0=0, N: int = 1, budget: int = DEFAULT_ATOMS) -> int:
    """Number of positive-probability (action, state) paths of length ``N`` over all action choices."""
    x0 = _x0(m, x0)
    counts = np.zeros(len(m.states), dtype=object)
    counts[x0] = 1
    for _ in range(N):
        branching = ((m.kernel > 0) & m.feasible[:, :, None]).sum(axis=1)  # (x, x')
        counts = np.array([sum(int(counts[x]) * int(branching[x, y]) for x in range(len(m.states)))
                           for y in range(len(m.states))], dtype=object)
        if sum(counts) > budget:
            raise BudgetError(f"more than {budget} path atoms")
    return int(sum(counts))
