"""Augmented process on states x accumulated costs (x discount factors).

The augmented state ``(x, d, z)`` records the current state, the cost
accumulated so far in every objective, and the running discount vector.
From ``(x, d, z)`` action ``a`` leads to ``(x', d + z*C(x,a,x'), z*beta)``
with probability P(x'|x;a).  Only states reachable from the start are ever
built; layer ``n`` holds the distinct states reachable in ``n`` steps.

Within a layer every state shares the same ``z`` (it is ``beta**n``), so
deduplication keys on ``(x, d)`` with ``d`` quantized to ``1e-12`` relative
to the largest accumulated cost in the layer.
"""
from __future__ import annotations

import io
import itertools
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .core.model import TransitionTable
from .core.utility import DiscountSpec, UNDISCOUNTED
from .errors import BudgetError, FeasibilityError

log = logging.getLogger(__name__)

DEFAULT_BUDGET = 10**7
REL_QUANTUM = 1e-12


@dataclass(frozen=True)
class AugmentedState:
    x: str
    d: Tuple[float, ...]
    z: Optional[Tuple[float, ...]] = None


def quantum_for(d: np.ndarray) -> float:
    top = float(np.abs(d).max()) if d.size else 0.0
    return REL_QUANTUM * max(1.0, top)


def quantize(d: np.ndarray, quantum: float) -> np.ndarray:
    return np.rint(np.asarray(d) / quantum).astype(np.int64)


@dataclass(eq=False)
class ReachableLayer:
    """States reachable at stage ``n`` plus their successor structure.

    ``xs[i]`` and ``d[i]`` describe state ``i``; ``z`` is the shared discount
    vector (``None`` when undiscounted).  After :meth:`LayerBuilder.extend`
    the arrays ``state_ptr, pair_action, succ_ptr, succ_idx, succ_prob``
    link this layer to the next one (see :mod:`morsdp._kernels_py`).
    """

    n: int
    xs: np.ndarray
    d: np.ndarray
    z: Optional[np.ndarray]
    quantum: float
    labels: Tuple[str, ...] = ()
    state_ptr: Optional[np.ndarray] = None
    pair_action: Optional[np.ndarray] = None
    succ_ptr: Optional[np.ndarray] = None
    succ_idx: Optional[np.ndarray] = None
    succ_prob: Optional[np.ndarray] = None
    succ_cost: Optional[np.ndarray] = None
    _index: Optional[dict] = field(default=None, repr=False)

    def __len__(self):
        return len(self.xs)

    @property
    def expanded(self) -> bool:
        return self.state_ptr is not None

    @property
    def z_vector(self) -> np.ndarray:
        return np.ones(self.d.shape[1]) if self.z is None else self.z

    def state(self, i: int) -> AugmentedState:
        z = None if self.z is None else tuple(float(v) for v in self.z)
        return AugmentedState(self.labels[self.xs[i]], tuple(float(v) for v in self.d[i]), z)

    def lookup(self, x: int, d) -> int:
        """Index of ``(x, d)`` in this layer, or -1."""
        if self._index is None:
            keys = quantize(self.d, self.quantum)
            self._index = {(int(x_), *k.tolist()): i for i, (x_, k) in enumerate(zip(self.xs, keys))}
        d = np.asarray(d, dtype=float)
        q = quantize(d, self.quantum)
        hit = self._index.get((int(x), *q.tolist()), -1)
        if hit >= 0 or len(q) > 4:
            return hit
        # a value within one quantum may sit across a rounding boundary
        for step in itertools.product((-1, 0, 1), repeat=len(q)):
            i = self._index.get((int(x), *(q + step).tolist()), -1)
            if i >= 0 and np.max(np.abs(self.d[i] - d)) <= self.quantum:
                return i
        return -1

    def actions_of(self, i: int) -> np.ndarray:
        return self.pair_action[self.state_ptr[i]:self.state_ptr[i + 1]]


def _ranges(starts, counts):
    """Concatenation of ``range(s, s + c)`` for every (s, c), vectorized."""
    total = int(counts.sum())
    if total == 0:
        return np.zeros(0, dtype=np.int64)
    offsets = np.repeat(np.cumsum(counts) - counts, counts)
    return np.arange(total, dtype=np.int64) - offsets + np.repeat(starts, counts)


class LayerBuilder:
    """Grows reachable layers one stage at a time from a start state."""

    def __init__(self, table: TransitionTable, labels, x0: int, disc: DiscountSpec = UNDISCOUNTED,
                 d0=None, budget: int = DEFAULT_BUDGET):
        self.table = table
        self.labels = tuple(labels)
        self.k = table.n_objectives
        self.beta = disc.vector(self.k) if disc.discounted else None
        self.budget = int(budget)
        d0 = np.zeros(self.k) if d0 is None else np.asarray(d0, dtype=float).reshape(self.k)
        if np.any(d0 < 0):
            raise ValueError("initial accumulated cost must be nonnegative")
        z0 = None if self.beta is None else np.ones(self.k)
        self.layers: List[ReachableLayer] = [
            ReachableLayer(0, np.array([x0], dtype=np.int64), d0[None, :].copy(), z0,
                           quantum_for(d0), self.labels)
        ]

    def extend(self) -> ReachableLayer:
        """Expand the last layer and append the next one."""
        layer = self.layers[-1]
        t = self.table
        K = len(layer)
        counts = t.pair_ptr[layer.xs + 1] - t.pair_ptr[layer.xs]
        if np.any(counts == 0):
            bad = layer.xs[np.argmin(counts)]
            raise FeasibilityError(f"state {self.labels[bad]!r} has no feasible action")
        state_ptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        pair_ids = _ranges(t.pair_ptr[layer.xs], counts)
        nsucc = t.succ_ptr[pair_ids + 1] - t.succ_ptr[pair_ids]
        total = int(nsucc.sum())
        if total > 8 * self.budget:
            raise BudgetError(f"layer {layer.n + 1} would need {total} candidate states")
        succ_ptr = np.concatenate([[0], np.cumsum(nsucc)]).astype(np.int64)
        succ_ids = _ranges(t.succ_ptr[pair_ids], nsucc)
        owner = np.repeat(np.repeat(np.arange(K), counts), nsucc)

        xn = t.succ_state[succ_ids]
        cost = t.succ_cost[succ_ids]
        z = layer.z_vector
        dn = layer.d[owner] + (cost if layer.z is None else z * cost)
        quantum = quantum_for(dn)
        keys = np.column_stack([xn, quantize(dn, quantum)])
        if len(keys):
            uniq, first, inverse = np.unique(keys, axis=0, return_index=True, return_inverse=True)
            inverse = inverse.reshape(-1)
        else:
            uniq, first, inverse = keys, np.zeros(0, np.int64), np.zeros(0, np.int64)
        if len(uniq) > self.budget:
            raise BudgetError(f"layer {layer.n + 1} has {len(uniq)} states, budget is {self.budget}")

        layer.state_ptr = state_ptr
        layer.pair_action = t.pair_action[pair_ids]
        layer.succ_ptr = succ_ptr
        layer.succ_idx = inverse.astype(np.int64)
        layer.succ_prob = np.ascontiguousarray(t.succ_prob[succ_ids])
        layer.succ_cost = cost
        znext = None if layer.z is None else z * self.beta
        nxt = ReachableLayer(layer.n + 1, uniq[:, 0].copy(), dn[first], znext, quantum, self.labels)
        self.layers.append(nxt)
        log.debug("layer %d: %d states from %d candidates", nxt.n, len(nxt), total)
        return nxt

    def grow_to(self, N: int) -> List[ReachableLayer]:
        while len(self.layers) <= N:
            self.extend()
        return self.layers[: N + 1]


def _table_and_labels(m):
    return m.table, m.states


def reachable_layers(x0, m, disc: DiscountSpec = UNDISCOUNTED, N: int = 0, d0=None,
                     budget: int = DEFAULT_BUDGET) -> List[ReachableLayer]:
    """Layers ``0..N`` of augmented states reachable from ``(x0, d0, 1)``.

    ``x0`` is a state label or index.  The last layer is not expanded.
    """
    if N < 0:
        raise ValueError("horizon must be nonnegative")
    table, labels = _table_and_labels(m)
    x = _state_index(m, x0)
    return LayerBuilder(table, labels, x, disc, d0, budget).grow_to(N)


def _state_index(m, x0) -> int:
    if isinstance(x0, (int, np.integer)) and not isinstance(x0, bool):
        return int(x0)
    return m.state_index(x0)


def successors(s: AugmentedState, a, m, disc: DiscountSpec = UNDISCOUNTED):
    """Successors of one augmented state under action ``a`` (label or index)."""
    x = m.state_index(s.x)
    ai = a if isinstance(a, (int, np.integer)) else m.action_index(a)
    p = m.table.pair_index(x, ai)
    if p < 0:
        raise FeasibilityError(f"action {m.actions[ai]!r} is not feasible in state {s.x!r}")
    ys, probs, costs = m.table.successors(p)
    d = np.asarray(s.d, dtype=float)
    k = len(d)
    if disc.discounted:
        z = np.ones(k) if s.z is None else np.asarray(s.z, dtype=float)
        beta = disc.vector(k)
        znext = tuple(float(v) for v in z * beta)
    else:
        z, znext = None, None
    out = []
    for y, p_, c in zip(ys, probs, costs):
        dn = d + (c if z is None else z * c)
        out.append((AugmentedState(m.states[y], tuple(float(v) for v in dn), znext), float(p_)))
    return out


def layer_sizes_csv(layers) -> str:
    buf = io.StringIO()
    buf.write("stage,states,pairs,successors\n")
    for layer in layers:
        pairs = len(layer.pair_action) if layer.expanded else 0
        succ = len(layer.succ_idx) if layer.expanded else 0
        buf.write(f"{layer.n},{len(layer)},{pairs},{succ}\n")
    return buf.getvalue()
