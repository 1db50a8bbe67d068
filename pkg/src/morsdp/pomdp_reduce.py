"""Reduction of a risk-sensitive POMDP with a sum-of-exponentials utility to
a completely observable multi-objective MDP on information states.

Under the reference measure the observations are i.i.d. uniform on ``Y``.
For term ``i`` the unnormalized filter evolves by ``psi' = |Y| M_i(a,y) psi``
with ``M_i(a,y)[s',s] = exp(lam_i C(s,a)) P(s'|s;a) Q(y|s')``.  Normalizing
gives the information state ``theta_i``; the log of the normalizer becomes a
running cost, so that ``E[exp(lam_i sum C_i)]`` on the information chain
equals the original risk-sensitive expectation.

Observations with zero likelihood are pruned: their running cost would be
``-inf * sign(lam_i)`` and their contribution to every exponential term is 0.
The information kernel is therefore substochastic.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from . import bellman
from .augment import DEFAULT_BUDGET
from .core.model import ObservationPolicy, POMDPModel, TransitionTable
from .core.utility import UNDISCOUNTED, SumOfExponentials
from .errors import BudgetError, InconsistencyError, ModelError

log = logging.getLogger(__name__)

THETA_QUANTUM = 1e-10


@dataclass(frozen=True, eq=False)
class ExpMatrixSet:
    """The matrices ``M_i(a, y)`` in factored form.

    ``base[a, y, s', s] = P(s'|s;a) Q(y|s')`` and
    ``log_weight[i, a, s] = lam_i * (C(s,a) + offset_i)``, so that
    ``M_i(a,y) = base[a,y] @ diag(exp(log_weight[i,a]))``.
    """

    base: np.ndarray
    log_weight: np.ndarray
    rates: np.ndarray

    def matrix(self, i: int, a: int, y: int) -> np.ndarray:
        return self.base[a, y] * np.exp(self.log_weight[i, a])[None, :]

    @property
    def n_obs(self) -> int:
        return self.base.shape[1]


def build_matrices(p: POMDPModel) -> ExpMatrixSet:
    base = p.transition.transpose(0, 2, 1)[:, None, :, :] * p.signal.T[None, :, :, None]
    cost = p.cost.T[None, :, :] + p.cost_offset[:, None, None]  # (i, a, s)
    log_weight = p.rates[:, None, None] * cost
    return ExpMatrixSet(np.ascontiguousarray(base), log_weight, p.rates.copy())


def _likelihood(theta, i, a, y, mats):
    """``(M theta, log-scale)`` with ``M theta * exp(scale)`` the true vector."""
    lw = mats.log_weight[i, a]
    live = theta > 0
    if not live.any():
        raise InconsistencyError("information state has no mass")
    top = lw[live].max()
    v = mats.base[a, y] @ (theta * np.exp(np.where(live, lw - top, -np.inf)))
    return v, top


def bayes_step(theta, i: int, a: int, y: int, mats: ExpMatrixSet) -> Tuple[np.ndarray, float]:
    """Normalized filter update and the cost ``(1/lam_i) log(1' M_i(a,y) theta)``."""
    theta = np.asarray(theta, dtype=float)
    v, top = _likelihood(theta, i, a, y, mats)
    tot = v.sum()
    if not tot > 0:
        raise InconsistencyError(f"observation {y} is impossible under action {a}")
    return v / tot, float((top + math.log(tot)) / mats.rates[i])


@dataclass(frozen=True)
class InformationState:
    thetas: Tuple[Tuple[float, ...], ...]
    y: str

    def key(self):
        q = np.rint(np.asarray(self.thetas) / THETA_QUANTUM).astype(np.int64)
        return (self.y, q.tobytes())


def info_successors(x: InformationState, a, p: POMDPModel, mats: Optional[ExpMatrixSet] = None):
    """Successors ``(x', 1/|Y|, costs)`` of ``x`` under ``a``; impossible observations are dropped."""
    mats = build_matrices(p) if mats is None else mats
    ai = a if isinstance(a, (int, np.integer)) else p.actions.index(str(a))
    ny = len(p.observations)
    out = []
    for y in range(ny):
        thetas, costs = [], []
        for i in range(p.n_terms):
            theta = np.asarray(x.thetas[i])
            v, top = _likelihood(theta, i, ai, y, mats)
            tot = v.sum()
            if not tot > 0:
                break
            thetas.append(tuple((v / tot).tolist()))
            costs.append((top + math.log(tot) + math.log(ny)) / mats.rates[i])
        else:
            out.append((InformationState(tuple(thetas), p.observations[y]), 1.0 / ny, np.array(costs)))
    return out


@dataclass(eq=False)
class InformationMDP:
    """Information states reachable within a horizon, as a finite controlled chain.

    Quacks like :class:`FiniteMDP` for the augmented solver: it exposes
    ``states``, ``actions``, ``table`` and index lookups.  Successor
    probabilities of a pair may sum to less than 1 (pruned observations).
    """

    pomdp: POMDPModel
    info_states: List[InformationState]
    states: Tuple[str, ...]
    actions: Tuple[str, ...]
    table: TransitionTable
    utility: SumOfExponentials
    horizon: int
    discount: object = UNDISCOUNTED
    allow_zero_cost: bool = True
    _index: dict = field(default_factory=dict, repr=False)

    @property
    def n_objectives(self) -> int:
        return self.pomdp.n_terms

    @property
    def lower(self):
        return self.table.succ_cost.min(axis=0)

    @property
    def upper(self):
        return self.table.succ_cost.max(axis=0)

    def state_index(self, label) -> int:
        if isinstance(label, InformationState):
            return self._index[label.key()]
        try:
            return self.states.index(str(label))
        except ValueError:
            raise ModelError(f"unknown information state {label!r}") from None

    def action_index(self, label) -> int:
        try:
            return self.actions.index(str(label))
        except ValueError:
            raise ModelError(f"unknown action {label!r}") from None

    def to_document(self) -> dict:
        """Inspection dump in the ``mdp`` document layout (the kernel may be substochastic)."""
        t = self.table
        S, A = self.states, self.actions
        trans, costs = [], [[] for _ in range(self.n_objectives)]
        for x in range(len(S)):
            for p in t.pairs_of(x):
                ys, probs, cs = t.successors(p)
                a = A[t.pair_action[p]]
                for y, pr, c in zip(ys, probs, cs):
                    trans.append([S[x], a, S[y], float(pr)])
                    for i in range(self.n_objectives):
                        costs[i].append([S[x], a, S[y], float(c[i])])
        return {
            "kind": "mdp",
            "states": list(S),
            "actions": list(A),
            "transitions": trans,
            "costs": [{"name": f"term{i + 1}", "entries": costs[i],
                       "lower": float(self.lower[i]) if len(costs[i]) else 0.0,
                       "upper": float(self.upper[i]) if len(costs[i]) else 0.0}
                      for i in range(self.n_objectives)],
            "utility": self.utility.to_dict(),
            "information_states": [
                {"label": S[j], "y": s.y, "thetas": [list(th) for th in s.thetas]}
                for j, s in enumerate(self.info_states)
            ],
        }


def _check_theta0(p: POMDPModel, theta0):
    theta0 = np.asarray(theta0, dtype=float).reshape(-1)
    if theta0.shape != (len(p.hidden_states),):
        raise ModelError(f"initial distribution needs {len(p.hidden_states)} entries")
    if (theta0 < 0).any() or abs(theta0.sum() - 1.0) > 1e-12:
        raise ModelError("initial distribution must be nonnegative and sum to 1")
    return theta0


def information_mdp(p: POMDPModel, theta0, N: int, y0=None, budget: int = DEFAULT_BUDGET) -> InformationMDP:
    """Build the information chain on everything reachable from ``x0`` in fewer than ``N`` steps."""
    if N < 1:
        raise ValueError("horizon must be at least 1")
    theta0 = _check_theta0(p, theta0)
    mats = build_matrices(p)
    y0 = p.observations[0] if y0 is None else str(y0)
    if y0 not in p.observations:
        raise ModelError(f"unknown observation {y0!r}")
    root = InformationState(tuple(tuple(theta0.tolist()) for _ in range(p.n_terms)), y0)
    states, index = [root], {root.key(): 0}
    rows = {}  # state -> list over actions of [(succ, prob, costs)]
    frontier = [0]
    for _ in range(N):
        nxt = []
        for j in frontier:
            per_action = []
            for a in range(len(p.actions)):
                succ = []
                for x2, pr, cost in info_successors(states[j], a, p, mats):
                    k = index.get(x2.key())
                    if k is None:
                        k = index[x2.key()] = len(states)
                        states.append(x2)
                        nxt.append(k)
                        if len(states) > budget:
                            raise BudgetError(f"more than {budget} information states")
                    succ.append((k, pr, cost))
                per_action.append(succ)
            rows[j] = per_action
        frontier = nxt

    pair_ptr, pair_action, succ_ptr = [0], [], [0]
    succ_state, succ_prob, succ_cost = [], [], []
    for j in range(len(states)):
        for a, succ in enumerate(rows.get(j, ())):
            pair_action.append(a)
            for k, pr, cost in succ:
                succ_state.append(k)
                succ_prob.append(pr)
                succ_cost.append(cost)
            succ_ptr.append(len(succ_state))
        pair_ptr.append(len(pair_action))
    table = TransitionTable(
        n_states=len(states), n_actions=len(p.actions),
        pair_ptr=np.array(pair_ptr, np.int64), pair_action=np.array(pair_action, np.int64),
        succ_ptr=np.array(succ_ptr, np.int64), succ_state=np.array(succ_state, np.int64),
        succ_prob=np.array(succ_prob, float),
        succ_cost=np.array(succ_cost, float).reshape(-1, p.n_terms),
    )
    labels = tuple(f"i{j}" for j in range(len(states)))
    return InformationMDP(p, states, labels, tuple(p.actions), table,
                          SumOfExponentials(p.terms), N, _index=index)


def info_chain_expectations(p: POMDPModel, theta0, policy, N: int, y0=None) -> np.ndarray:
    """``E[exp(lam_i * sum_k C_i)]`` per term over the information chain under ``policy``.

    ``policy`` maps a tuple of observation labels ``(y1, ..., yn)`` to an action label.
    """
    theta0 = _check_theta0(p, theta0)
    mats = build_matrices(p)
    rates = p.rates
    root = InformationState(tuple(tuple(theta0.tolist()) for _ in range(p.n_terms)),
                            p.observations[0] if y0 is None else str(y0))
    parts = [[] for _ in range(p.n_terms)]

    def walk(x, ys, prob, acc):
        if len(ys) == N:
            for i in range(p.n_terms):
                parts[i].append(prob * math.exp(rates[i] * acc[i]))
            return
        a = p.actions.index(policy(ys))
        for x2, pr, cost in info_successors(x, a, p, mats):
            walk(x2, ys + (x2.y,), prob * pr, acc + cost)

    walk(root, (), 1.0, np.zeros(p.n_terms))
    return np.array([math.fsum(v) for v in parts])


def shift_terms(terms, m, N: int):
    """Weights and per-term cost offsets that make every running cost positive.

    For ``m_i <= 0`` the cost grows by ``2|m_i|`` and the weight shrinks by
    ``exp(-2 N lam_i |m_i|)``, leaving every utility value unchanged.
    """
    new_terms, offsets = [], []
    for (w, lam), mi in zip(terms, m):
        if mi > 0:
            new_terms.append((w, lam))
            offsets.append(0.0)
        else:
            shift = 2.0 * abs(mi)
            new_terms.append((w * math.exp(-N * lam * shift), lam))
            offsets.append(shift)
    return tuple(new_terms), np.array(offsets)


def reachable_cost_minimum(p: POMDPModel, theta0, N: int, y0=None, budget=DEFAULT_BUDGET) -> np.ndarray:
    """Per-term minimum running cost over the information transitions reachable within ``N`` steps."""
    info = information_mdp(p, theta0, N, y0, budget)
    if info.table.succ_cost.shape[0] == 0:
        raise ModelError("no observation is possible from the initial distribution")
    return info.table.succ_cost.min(axis=0)


def shift_costs(p: POMDPModel, N: int, theta0, y0=None, budget=DEFAULT_BUDGET) -> POMDPModel:
    """Shifted model whose reachable information costs are all positive."""
    if N < 1:
        raise ValueError("horizon must be at least 1")
    m = reachable_cost_minimum(p, theta0, N, y0, budget)
    if not np.all(np.isfinite(m)):
        raise ModelError("running cost is unbounded below")
    terms, offsets = shift_terms(p.terms, m, N)
    if not offsets.any():
        return p
    return p.with_terms(terms, p.cost_offset + offsets)


@dataclass(eq=False)
class RSPOMDPSolution:
    value: float
    policy: ObservationPolicy
    info: InformationMDP
    solution: bellman.FiniteSolution
    model: POMDPModel

    def to_json_dict(self):
        return {"value": self.value, "policy": self.policy.entries()}


def observation_policy(sol: bellman.FiniteSolution, info: InformationMDP) -> ObservationPolicy:
    """Decision tree on observation sequences realised by the optimal augmented rules."""
    t = info.table
    table = {}

    def walk(x, d, n, ys):
        if n == len(sol.stages):
            return
        a = sol.stages[n].action_at(x, d)
        if a < 0:
            raise InconsistencyError(f"optimal run left the reachable set at stage {n}")
        table[ys] = info.actions[a]
        ys_, _, costs = t.successors(t.pair_index(x, a))
        for x2, c in zip(ys_, costs):
            walk(int(x2), d + c, n + 1, ys + (info.info_states[x2].y,))

    walk(0, np.zeros(info.n_objectives), 0, ())
    return ObservationPolicy(table, info.actions[0])


def solve_rspomdp(p: POMDPModel, theta0, N: int, y0=None, shift: bool = True,
                  budget: int = DEFAULT_BUDGET, threads: int = 1) -> RSPOMDPSolution:
    """Optimal value ``sum_i w_i sign(lam_i) E[exp(lam_i sum C)]`` and an optimal observation policy."""
    q = shift_costs(p, N, theta0, y0, budget) if shift else p
    info = information_mdp(q, theta0, N, y0, budget)
    sol = bellman.solve_finite(info, info.utility, UNDISCOUNTED, N, 0, budget=budget, threads=threads)
    return RSPOMDPSolution(sol.value, observation_policy(sol, info), info, sol, q)
