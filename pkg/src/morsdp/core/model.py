"""Finite model types: completely observable MDPs and hidden-state POMDPs."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Tuple

import numpy as np

from ..errors import CostBoundError, FeasibilityError, ModelError, StochasticityError
from .utility import DiscountSpec, UtilitySpec

ROW_TOL = 1e-12


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TransitionTable:
    """Sparse successor structure of a finite controlled chain.

    Pairs ``(x, a)`` with ``a`` feasible in ``x`` are numbered in state-major,
    action-minor order; ``pair_ptr[x]:pair_ptr[x+1]`` are the pairs of state
    ``x``.  Successors of pair ``p`` are ``succ_ptr[p]:succ_ptr[p+1]`` and only
    positive-probability entries are stored.  ``succ_cost`` has one row per
    successor and one column per objective.
    """

    n_states: int
    n_actions: int
    pair_ptr: np.ndarray
    pair_action: np.ndarray
    succ_ptr: np.ndarray
    succ_state: np.ndarray
    succ_prob: np.ndarray
    succ_cost: np.ndarray

    @property
    def n_objectives(self) -> int:
        return self.succ_cost.shape[1]

    def pairs_of(self, x: int) -> range:
        return range(int(self.pair_ptr[x]), int(self.pair_ptr[x + 1]))

    def pair_index(self, x: int, a: int) -> int:
        for p in self.pairs_of(x):
            if self.pair_action[p] == a:
                return p
        return -1

    def successors(self, p: int):
        lo, hi = int(self.succ_ptr[p]), int(self.succ_ptr[p + 1])
        return self.succ_state[lo:hi], self.succ_prob[lo:hi], self.succ_cost[lo:hi]


@dataclass(frozen=True, eq=False)
class FiniteMDP:
    """Finite completely observable MDP with vector-valued transition costs.

    ``kernel[x, a, x']`` is P(x'|x;a); ``costs[i, x, a, x']`` is C^i(x,a,x').
    Entries for infeasible pairs are ignored (kept at zero).  ``lower`` and
    ``upper`` are the declared per-objective cost bounds.
    """

    states: Tuple[str, ...]
    actions: Tuple[str, ...]
    feasible: np.ndarray
    kernel: np.ndarray
    costs: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    cost_names: Tuple[str, ...] = ()
    allow_zero_cost: bool = False
    utility: Optional[UtilitySpec] = None
    discount: DiscountSpec = field(default_factory=DiscountSpec)

    def __post_init__(self):
        set_ = lambda k, v: object.__setattr__(self, k, v)
        set_("states", tuple(str(s) for s in self.states))
        set_("actions", tuple(str(a) for a in self.actions))
        nx, na = len(self.states), len(self.actions)
        if nx == 0 or na == 0:
            raise ModelError("model needs at least one state and one action")
        if len(set(self.states)) != nx or len(set(self.actions)) != na:
            raise ModelError("state and action labels must be unique")
        feasible = _frozen(self.feasible, bool)
        kernel = np.array(self.kernel, dtype=float)
        costs = np.array(self.costs, dtype=float)
        if costs.ndim == 3:
            costs = costs[None]
        if feasible.shape != (nx, na) or kernel.shape != (nx, na, nx):
            raise ModelError("feasible/kernel shapes do not match the label sets")
        if costs.shape[1:] != (nx, na, nx):
            raise ModelError("cost array shape does not match the label sets")
        k = costs.shape[0]
        lower = _frozen(np.broadcast_to(np.asarray(self.lower, float), (k,)))
        upper = _frozen(np.broadcast_to(np.asarray(self.upper, float), (k,)))
        names = tuple(self.cost_names) or tuple(f"c{i + 1}" for i in range(k))
        if len(names) != k:
            raise ModelError("one name per cost objective is required")
        set_("cost_names", names)

        for x in range(nx):
            if not feasible[x].any():
                raise FeasibilityError(f"state {self.states[x]!r} has no feasible action")
        mask = feasible[:, :, None]
        kernel = np.where(mask, kernel, 0.0)
        costs = np.where(mask[None], costs, 0.0)
        for x, a in zip(*np.nonzero(feasible)):
            row = kernel[x, a]
            if (row < 0).any() or abs(row.sum() - 1.0) > ROW_TOL:
                raise StochasticityError(
                    f"row P(.|{self.states[x]!r};{self.actions[a]!r}) sums to {float(row.sum())!r}"
                    + (" and has negative entries" if (row < 0).any() else "")
                )
        for i in range(k):
            lo, hi = lower[i], upper[i]
            if lo > hi:
                raise CostBoundError(f"cost {names[i]!r}: lower bound {lo} exceeds upper {hi}")
            if lo < 0 or (lo == 0 and not self.allow_zero_cost):
                raise CostBoundError(
                    f"cost {names[i]!r}: lower bound must be > 0 (got {lo})"
                    + self._first_nonpositive(costs[i], kernel, feasible)
                )
            outside = mask & (kernel > 0) & ((costs[i] < lo) | (costs[i] > hi) | np.isnan(costs[i]))
            if outside.any():
                x, a, y = np.argwhere(outside)[0]
                raise CostBoundError(
                    f"cost {names[i]!r} at ({self.states[x]!r}, {self.actions[a]!r}, "
                    f"{self.states[y]!r}) = {costs[i, x, a, y]} outside [{lo}, {hi}]"
                )
        if self.utility is not None and self.utility.arity != k:
            raise ModelError(f"utility arity {self.utility.arity} != number of costs {k}")
        if self.discount.beta is not None:
            self.discount.vector(k)
        set_("feasible", feasible)
        set_("kernel", _frozen(kernel))
        set_("costs", _frozen(costs))
        set_("lower", lower)
        set_("upper", upper)

    def _first_nonpositive(self, cost, kernel, feasible):
        hit = np.argwhere(feasible[:, :, None] & (kernel > 0) & (cost <= 0))
        if hit.size == 0:
            return ""
        x, a, y = hit[0]
        return f"; offending triple ({self.states[x]!r}, {self.actions[a]!r}, {self.states[y]!r})"

    @property
    def n_objectives(self) -> int:
        return self.costs.shape[0]

    def state_index(self, label) -> int:
        try:
            return self.states.index(str(label))
        except ValueError:
            raise ModelError(f"unknown state {label!r}") from None

    def action_index(self, label) -> int:
        try:
            return self.actions.index(str(label))
        except ValueError:
            raise ModelError(f"unknown action {label!r}") from None

    def feasible_actions(self, x: int):
        return [int(a) for a in np.nonzero(self.feasible[x])[0]]

    def cost_vector(self, x: int, a: int, y: int) -> np.ndarray:
        return self.costs[:, x, a, y]

    @cached_property
    def table(self) -> TransitionTable:
        nx, na = len(self.states), len(self.actions)
        pair_ptr, pair_action, succ_ptr = [0], [], [0]
        succ_state, succ_prob, succ_cost = [], [], []
        for x in range(nx):
            for a in range(na):
                if not self.feasible[x, a]:
                    continue
                pair_action.append(a)
                ys = np.nonzero(self.kernel[x, a] > 0)[0]
                succ_state.extend(ys.tolist())
                succ_prob.extend(self.kernel[x, a, ys].tolist())
                succ_cost.extend(self.costs[:, x, a, ys].T.tolist())
                succ_ptr.append(len(succ_state))
            pair_ptr.append(len(pair_action))
        return TransitionTable(
            n_states=nx,
            n_actions=na,
            pair_ptr=_frozen(pair_ptr, np.int64),
            pair_action=_frozen(pair_action, np.int64),
            succ_ptr=_frozen(succ_ptr, np.int64),
            succ_state=_frozen(succ_state, np.int64),
            succ_prob=_frozen(succ_prob),
            succ_cost=_frozen(np.reshape(succ_cost, (-1, self.n_objectives))),
        )


@dataclass(frozen=True, eq=False)
class POMDPModel:
    """Finite risk-sensitive POMDP with a sum-of-exponentials utility.

    ``transition[a, s, s']`` is P^(s'|s;a), ``signal[s, y]`` is Q(y|s) and
    ``cost[s, a]`` is the running cost.  ``terms`` holds ``(w, lambda)`` pairs.
    ``cost_offset`` adds a per-term constant to the running cost; it is zero
    for parsed models and set by cost shifting.
    """

    hidden_states: Tuple[str, ...]
    observations: Tuple[str, ...]
    actions: Tuple[str, ...]
    transition: np.ndarray
    signal: np.ndarray
    cost: np.ndarray
    terms: Tuple[Tuple[float, float], ...]
    cost_offset: Optional[np.ndarray] = None

    def __post_init__(self):
        set_ = lambda k, v: object.__setattr__(self, k, v)
        for name in ("hidden_states", "observations", "actions"):
            labels = tuple(str(v) for v in getattr(self, name))
            if not labels or len(set(labels)) != len(labels):
                raise ModelError(f"{name} must be a nonempty list of unique labels")
            set_(name, labels)
        ns, ny, na = len(self.hidden_states), len(self.observations), len(self.actions)
        transition = np.array(self.transition, dtype=float)
        signal = np.array(self.signal, dtype=float)
        cost = np.array(self.cost, dtype=float)
        if transition.shape != (na, ns, ns):
            raise ModelError(f"transition must have shape {(na, ns, ns)}, got {transition.shape}")
        if signal.shape != (ns, ny):
            raise ModelError(f"signal must have shape {(ns, ny)}, got {signal.shape}")
        if cost.shape != (ns, na):
            raise ModelError(f"cost must have shape {(ns, na)}, got {cost.shape}")
        if not np.all(np.isfinite(cost)):
            raise ModelError("costs must be finite")
        for a in range(na):
            for s in range(ns):
                row = transition[a, s]
                if (row < 0).any() or abs(row.sum() - 1.0) > ROW_TOL:
                    raise StochasticityError(
                        f"row P(.|{self.hidden_states[s]!r};{self.actions[a]!r}) sums to {float(row.sum())!r}"
                    )
        for s in range(ns):
            row = signal[s]
            if (row < 0).any() or abs(row.sum() - 1.0) > ROW_TOL:
                raise StochasticityError(
                    f"signal row Q(.|{self.hidden_states[s]!r}) sums to {float(row.sum())!r}"
                )
        terms = tuple((float(w), float(lam)) for w, lam in self.terms)
        if not terms:
            raise ModelError("at least one exponential term is required")
        for w, lam in terms:
            if not w > 0 or lam == 0:
                raise ModelError(f"terms need w > 0 and lambda != 0, got ({w}, {lam})")
        offset = np.zeros(len(terms)) if self.cost_offset is None else np.array(self.cost_offset, float)
        if offset.shape != (len(terms),):
            raise ModelError("cost_offset needs one entry per term")
        set_("transition", _frozen(transition))
        set_("signal", _frozen(signal))
        set_("cost", _frozen(cost))
        set_("terms", terms)
        set_("cost_offset", _frozen(offset))

    @property
    def n_terms(self) -> int:
        return len(self.terms)

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for w, _ in self.terms])

    @property
    def rates(self) -> np.ndarray:
        return np.array([lam for _, lam in self.terms])

    @property
    def min_cost(self) -> float:
        return float(self.cost.min())

    @property
    def max_cost(self) -> float:
        return float(self.cost.max())

    def with_terms(self, terms, cost_offset=None) -> "POMDPModel":
        return POMDPModel(
            self.hidden_states, self.observations, self.actions,
            self.transition, self.signal, self.cost, terms,
            self.cost_offset if cost_offset is None else cost_offset,
        )


@dataclass(frozen=True, eq=False)
class ObservationPolicy:
    """Deterministic POMDP policy keyed by the observations seen so far.

    ``table`` maps ``(y1, ..., yn)`` (observation labels) to an action label.
    Observation sequences outside the table get ``default``.
    """

    table: dict
    default: str

    def __call__(self, ys) -> str:
        return self.table.get(tuple(ys), self.default)

    def entries(self):
        """Rows ``{"key": [a0, y1, a1, ..., yn], "action": an}`` sorted by length then key."""
        rows = []
        for ys in sorted(self.table, key=lambda k: (len(k), k)):
            key = []
            for n, y in enumerate(ys):
                key += [self(ys[:n]), y]
            rows.append({"key": key, "action": self.table[ys]})
        return rows
