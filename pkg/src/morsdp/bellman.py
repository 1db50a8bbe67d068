"""Minimal-cost operators and the finite / discounted / infinite-horizon solvers.

Value tables live on reachable layers (see :mod:`morsdp.augment`).  The table
on layer ``k`` of an ``N``-stage problem holds the value with ``N - k`` stages
to go; the terminal layer ``N`` holds ``U(d)``.
"""
from __future__ import annotations

import io
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from . import kernels
from .augment import DEFAULT_BUDGET, AugmentedState, LayerBuilder, ReachableLayer, _state_index
from .core.utility import DiscountSpec, UtilitySpec
from .errors import (
    InconsistencyError,
    ModelError,
    NumericalError,
    PolicyQueryError,
)

log = logging.getLogger(__name__)


@dataclass(eq=False)
class ValueTable:
    """Values on one reachable layer; ``stage`` is the layer depth."""

    stage: int
    layer: ReachableLayer
    values: np.ndarray

    def __getitem__(self, s: AugmentedState) -> float:
        i = self.layer.lookup(self.layer.labels.index(s.x), s.d)
        if i < 0:
            raise KeyError(s)
        return float(self.values[i])

    def items(self):
        for i in range(len(self.layer)):
            yield self.layer.state(i), float(self.values[i])


@dataclass(eq=False)
class StagePolicy:
    """Markov decision rule on the states of one reachable layer.

    ``actions[i]`` is the action index chosen in layer state ``i``.
    """

    stage: int
    layer: ReachableLayer
    actions: np.ndarray
    action_labels: Sequence[str] = ()

    def action_at(self, x: int, d) -> int:
        """Action index at ``(x, d)``, or -1 if the point is not in the layer."""
        i = self.layer.lookup(x, d)
        return -1 if i < 0 else int(self.actions[i])

    def __call__(self, s: AugmentedState):
        a = self.action_at(self.layer.labels.index(s.x), s.d)
        if a < 0:
            raise KeyError(s)
        return self.action_labels[a] if self.action_labels else a

    def entries(self):
        """``[x, d, z, action]`` rows in layer order."""
        z = None if self.layer.z is None else [float(v) for v in self.layer.z]
        rows = []
        for i in range(len(self.layer)):
            a = int(self.actions[i])
            rows.append([
                self.layer.labels[self.layer.xs[i]],
                [float(v) for v in self.layer.d[i]],
                z,
                self.action_labels[a] if self.action_labels else a,
            ])
        return rows


def _as2d(values):
    v = np.asarray(values, dtype=float)
    return np.ascontiguousarray(v[:, None] if v.ndim == 1 else v)


def _backup_min(layer: ReachableLayer, v_next, threads=1):
    if not layer.expanded:
        raise InconsistencyError(f"layer {layer.n} has no successor structure")
    return kernels.backup_min(layer.state_ptr, layer.pair_action, layer.succ_ptr, layer.succ_idx,
                              layer.succ_prob, _as2d(v_next), threads)


def _backup_fixed(layer: ReachableLayer, v_next, actions, threads=1):
    if not layer.expanded:
        raise InconsistencyError(f"layer {layer.n} has no successor structure")
    try:
        return kernels.backup_fixed(layer.state_ptr, layer.pair_action, layer.succ_ptr,
                                    layer.succ_idx, layer.succ_prob, _as2d(v_next),
                                    np.ascontiguousarray(actions, dtype=np.int64), threads)
    except LookupError as exc:
        raise InconsistencyError(str(exc)) from None


def _check_successor_table(v: ValueTable, layers):
    n = v.stage - 1
    if n < 0 or n >= len(layers) or layers[n + 1] is not v.layer:
        raise InconsistencyError("value table does not belong to the successor layer")
    if len(v.values) != len(v.layer):
        raise InconsistencyError("value table is missing successor values")
    return layers[n]


def apply_T_g(v: ValueTable, g: StagePolicy, layers: List[ReachableLayer], threads=1) -> ValueTable:
    """``T_g``: expectation of ``v`` one step ahead under the decision rule ``g``.

    ``v`` lives on layer ``n + 1`` and ``g`` on layer ``n``; the result lives on layer ``n``.
    """
    layer = _check_successor_table(v, layers)
    if g.layer is not layer:
        raise InconsistencyError("decision rule is not defined on the target layer")
    out = _backup_fixed(layer, v.values, g.actions, threads)
    return ValueTable(layer.n, layer, out[:, 0])


def apply_T(v: ValueTable, layers: List[ReachableLayer], action_labels=(), threads=1):
    """Minimal cost operator ``T``; returns the new table and an argmin rule.

    Ties go to the lowest action index in model order.
    """
    layer = _check_successor_table(v, layers)
    out, arg = _backup_min(layer, v.values, threads)
    return (ValueTable(layer.n, layer, out[:, 0]),
            StagePolicy(layer.n, layer, arg[:, 0], action_labels))


def _utility_on(u: UtilitySpec, layer: ReachableLayer):
    return np.asarray(u(layer.d), dtype=float).reshape(len(layer))


@dataclass(eq=False)
class HistoryPolicy:
    """Optimal history-dependent policy realised from per-stage Markov rules.

    ``stages[n]`` is the rule used at time ``n`` (it lives on layer ``n``).
    A raw history ``(x0, a0, x1, ..., xn)`` is answered by accumulating the
    (discounted) costs along it and querying ``stages[n]`` at ``(x_n, d_n)``.
    Points that no optimal run can reach get the first feasible action.
    """

    horizon: int
    stages: List[StagePolicy]
    model: object
    discount: DiscountSpec
    d0: np.ndarray
    off_manifold_queries: int = 0

    def _default_action(self, x: int) -> int:
        t = self.model.table
        return int(t.pair_action[t.pair_ptr[x]])

    def accumulate(self, history):
        """Return ``(x_n, d_n, n)`` for a raw history of labels."""
        m = self.model
        t = m.table
        if len(history) % 2 != 1:
            raise PolicyQueryError("history must be (x0, a0, x1, ..., xn)")
        xs = [_state_index(m, h) for h in history[0::2]]
        acts = [a if isinstance(a, (int, np.integer)) else m.action_index(a) for a in history[1::2]]
        k = len(self.d0)
        d = np.array(self.d0, dtype=float)
        beta = self.discount.vector(k) if self.discount.discounted else None
        z = None if beta is None else np.ones(k)
        for step, a in enumerate(acts):
            x, y = xs[step], xs[step + 1]
            p = t.pair_index(x, a)
            if p < 0:
                raise PolicyQueryError(f"action {m.actions[a]!r} infeasible at step {step}")
            ys, probs, costs = t.successors(p)
            hit = np.nonzero(ys == y)[0]
            if hit.size == 0:
                raise PolicyQueryError(
                    f"transition {m.states[x]!r} -> {m.states[y]!r} under {m.actions[a]!r} "
                    f"has probability zero")
            c = costs[hit[0]]
            d = d + (c if z is None else z * c)
            if z is not None:
                z = z * beta
        return xs[-1], d, len(acts)

    def action_index(self, history) -> int:
        x, d, n = self.accumulate(history)
        if n >= self.horizon:
            raise PolicyQueryError(f"history of length {n} is beyond the horizon {self.horizon}")
        a = self.stages[n].action_at(x, d)
        if a < 0:
            self.off_manifold_queries += 1
            a = self._default_action(x)
            log.info("off-manifold query at stage %d (x=%s, d=%s); default action %s",
                     n, self.model.states[x], d.tolist(), self.model.actions[a])
        return a

    def __call__(self, history):
        return self.model.actions[self.action_index(history)]


def realize_history_policy(stages: List[StagePolicy], m, disc: DiscountSpec, d0=None) -> HistoryPolicy:
    """Wrap per-stage rules (time 0 first) as a policy on raw histories."""
    k = m.table.n_objectives
    d0 = np.zeros(k) if d0 is None else np.asarray(d0, dtype=float)
    return HistoryPolicy(len(stages), list(stages), m, disc, d0)


@dataclass(eq=False)
class FiniteSolution:
    value: float
    policy: HistoryPolicy
    tables: List[ValueTable]
    stages: List[StagePolicy]
    layers: List[ReachableLayer]

    def to_json_dict(self):
        return {
            "value": self.value,
            "policy": [{"stage": g.stage, "entries": g.entries()} for g in self.stages],
        }

    def tables_csv(self) -> str:
        return tables_csv(self.tables)


def tables_csv(tables) -> str:
    buf = io.StringIO()
    if not tables:
        return ""
    k = tables[0].layer.d.shape[1]
    zcols = [f"z{i + 1}" for i in range(k)] if tables[0].layer.z is not None else []
    buf.write(",".join(["stage", "x"] + [f"d{i + 1}" for i in range(k)] + zcols + ["value"]) + "\n")
    for t in tables:
        layer = t.layer
        zpart = [repr(float(v)) for v in layer.z] if layer.z is not None else []
        for i in range(len(layer)):
            row = [str(t.stage), layer.labels[layer.xs[i]]]
            row += [repr(float(v)) for v in layer.d[i]] + zpart + [repr(float(t.values[i]))]
            buf.write(",".join(row) + "\n")
    return buf.getvalue()


def _resolve(m, u, disc):
    u = m.utility if u is None else u
    if u is None:
        raise ModelError("no utility given and the model document has none")
    if u.arity != m.table.n_objectives:
        raise ModelError(f"utility arity {u.arity} != number of objectives {m.table.n_objectives}")
    disc = getattr(m, "discount", DiscountSpec()) if disc is None else disc
    return u, disc


def solve_finite(m, u: Optional[UtilitySpec] = None, disc: Optional[DiscountSpec] = None, N: int = 1,
                 x0=0, d0=None, budget: int = DEFAULT_BUDGET, threads: int = 1,
                 keep_tables: bool = True) -> FiniteSolution:
    """Backward induction on the reachable augmented layers.

    Returns the optimal value at ``(x0, d0, 1)`` (``d0`` defaults to zero),
    the realised optimal history policy, and the value tables (layer 0 first).
    ``u``/``disc`` default to the ones stored on the model.
    """
    if N < 1:
        raise ValueError("horizon must be at least 1")
    u, disc = _resolve(m, u, disc)
    builder = LayerBuilder(m.table, m.states, _state_index(m, x0), disc, d0, budget)
    layers = builder.grow_to(N)
    labels = tuple(m.actions)
    v = ValueTable(N, layers[N], _utility_on(u, layers[N]))
    tables = [v]
    stages = []
    for k in range(N - 1, -1, -1):
        v, g = apply_T(v, layers, labels, threads)
        stages.append(g)
        if keep_tables:
            tables.append(v)
        else:
            tables[-1] = v
    stages.reverse()
    tables.reverse()
    policy = realize_history_policy(stages, m, disc, layers[0].d[0])
    return FiniteSolution(float(v.values[0]), policy, tables, stages, layers)


def evaluate_policy(layers: List[ReachableLayer], stages: List[StagePolicy], u: UtilitySpec,
                    threads: int = 1) -> float:
    """Cost iteration ``T_g0[T_g1[...T_g(N-1)[U]]]`` at the root."""
    N = len(stages)
    v = ValueTable(N, layers[N], _utility_on(u, layers[N]))
    for k in range(N - 1, -1, -1):
        v = apply_T_g(v, stages[k], layers, threads)
    return float(v.values[0])


# ---------------------------------------------------------------- infinite horizon


@dataclass(frozen=True)
class IterationRecord:
    n: int
    lower: float  # T^n[b_lower] at the root
    middle: float  # T^n[U] at the root
    upper: float  # T^n[b_upper] at the root

    @property
    def gap(self) -> float:
        return self.upper - self.lower


@dataclass(frozen=True)
class ConvergenceCertificate:
    iterations: int
    lower: float
    upper: float
    gap: float
    tolerance: float
    residual: float  # |T[v] - v| at the root for v = T^n[b_upper]

    def to_json_dict(self):
        return {"iterations": self.iterations, "lower": self.lower, "upper": self.upper,
                "gap": self.gap, "tolerance": self.tolerance, "residual": self.residual}


@dataclass(eq=False)
class StationaryRule:
    """Minimizing decision rule extracted from the final operator application.

    Defined on the reachable layers it was computed on; the layer is chosen
    by depth, i.e. by the power of ``beta`` in ``z``.
    """

    stages: List[StagePolicy]
    model: object

    def action_at(self, depth: int, x: int, d) -> int:
        if depth < len(self.stages):
            a = self.stages[depth].action_at(x, d)
            if a >= 0:
                return a
        t = self.model.table
        return int(t.pair_action[t.pair_ptr[x]])


@dataclass(eq=False)
class InfiniteSolution:
    lower: float
    upper: float
    rule: StationaryRule
    certificate: ConvergenceCertificate
    records: List[IterationRecord]
    layers: List[ReachableLayer]
    policy: HistoryPolicy = field(default=None)

    @property
    def bracket(self):
        return (self.lower, self.upper)

    @property
    def value(self) -> float:
        return 0.5 * (self.lower + self.upper)

    def to_json_dict(self):
        return {
            "value": self.value,
            "bracket": [self.lower, self.upper],
            "iterations": self.certificate.iterations,
            "policy": [{"stage": g.stage, "entries": g.entries()} for g in self.rule.stages],
            "certificate": self.certificate.to_json_dict(),
        }


def _seed_values(u, layer, low_tail, high_tail):
    z = layer.z_vector
    return np.column_stack([
        _utility_on_d(u, layer.d + z * low_tail),
        _utility_on_d(u, layer.d),
        _utility_on_d(u, layer.d + z * high_tail),
    ])


def _utility_on_d(u, d):
    return np.asarray(u(d), dtype=float).reshape(len(d))


def solve_infinite(m, u: Optional[UtilitySpec] = None, disc: Optional[DiscountSpec] = None, x0=0,
                   tol: float = 1e-6, max_iter: int = 500, budget: int = DEFAULT_BUDGET,
                   threads: int = 1, on_iteration=None) -> InfiniteSolution:
    """Bracket the infinite-horizon discounted value at ``(x0, 0, 1)``.

    Iterates ``T`` from the three seeds ``b_lower``, ``U`` and ``b_upper`` on
    the reachable tree grown one layer per iteration, until the root gap
    ``T^n[b_upper] - T^n[b_lower]`` is at most ``tol``.  One extra operator
    application measures the fixed-point residual and supplies the rule.
    ``on_iteration`` (optional) receives every :class:`IterationRecord`.
    """
    u, disc = _resolve(m, u, disc)
    if not tol > 0:
        raise ValueError("tolerance must be positive")
    if not disc.discounted:
        raise ModelError("the infinite-horizon solver needs a discount vector in (0,1)^k")
    if getattr(m, "allow_zero_cost", False) or np.any(np.asarray(m.lower) <= 0):
        raise ModelError("the infinite-horizon solver needs strictly positive cost bounds")
    k = m.table.n_objectives
    beta = disc.vector(k)
    low_tail = np.asarray(m.lower, dtype=float) / (1.0 - beta)
    high_tail = np.asarray(m.upper, dtype=float) / (1.0 - beta)
    builder = LayerBuilder(m.table, m.states, _state_index(m, x0), disc, None, budget)
    labels = tuple(m.actions)

    def sweep(n):
        layers = builder.grow_to(n)
        vals = _seed_values(u, layers[n], low_tail, high_tail)
        rules = [None] * n
        for j in range(n - 1, -1, -1):
            vals, arg = _backup_min(layers[j], vals, threads)
            rules[j] = arg
        return vals[0], rules

    records = []
    stalls = 0
    converged = False
    for n in range(1, max_iter + 1):
        root, _ = sweep(n)
        rec = IterationRecord(n, float(root[0]), float(root[1]), float(root[2]))
        records.append(rec)
        if on_iteration is not None:
            on_iteration(rec)
        if len(records) > 1:
            stalls = stalls + 1 if rec.gap >= records[-2].gap else 0
            if stalls >= 3:
                raise NumericalError(
                    f"bracket gap stopped decreasing at iteration {n} (gap {rec.gap:.3e})")
        if rec.gap <= tol:
            converged = True
            break
    if not converged:
        raise NumericalError(f"bracket gap {records[-1].gap:.3e} above {tol} after {max_iter} iterations")

    final = records[-1]
    root, rules = sweep(final.n + 1)
    residual = abs(float(root[2]) - final.upper)
    layers = builder.layers
    stages = [StagePolicy(j, layers[j], rules[j][:, 2].copy(), labels) for j in range(final.n + 1)]
    cert = ConvergenceCertificate(final.n, final.lower, final.upper, final.gap, tol, residual)
    rule = StationaryRule(stages, m)
    sol = InfiniteSolution(final.lower, final.upper, rule, cert, records, layers)
    sol.policy = realize_history_policy(stages, m, disc)
    return sol
