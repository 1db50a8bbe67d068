"""JSON model documents.

An ``mdp`` document::

    {"kind": "mdp", "states": [...], "actions": [...],
     "feasible": {state: [actions]},            # optional, default: all actions
     "transitions": [[x, a, x', p], ...],       # omitted triples mean 0
     "costs": [{"name": .., "entries": [[x, a, x', c], ...],
                "lower": .., "upper": .., "default": ..}, ...],
     "utility": {"type": "sum_exp", "terms": [{"w": .., "lambda": ..}]}
              | {"type": "expr", "src": ".."},
     "beta": [...], "allow_zero_cost": false}   # both optional

``default`` (optional) is the cost of triples without an entry; without it a
possible transition lacking a cost entry is an error.

A ``pomdp`` document::

    {"kind": "pomdp", "hidden_states": [...], "observations": [...],
     "actions": [...], "transition": [[s, a, s', p], ...],
     "signal": [[y, s, q], ...], "cost": [[s, a, c], ...],
     "terms": [{"w": .., "lambda": ..}, ...]}

Unknown keys are rejected everywhere.
"""
from __future__ import annotations

import json
from typing import Union

import numpy as np

from ..errors import ModelError, ModelSyntaxError
from .model import FiniteMDP, POMDPModel
from .utility import DiscountSpec, utility_from_dict

MDP_KEYS = {"kind", "states", "actions", "feasible", "transitions", "costs", "utility",
            "beta", "allow_zero_cost"}
MDP_REQUIRED = {"kind", "states", "actions", "transitions", "costs"}
COST_KEYS = {"name", "entries", "lower", "upper", "default"}
POMDP_KEYS = {"kind", "hidden_states", "observations", "actions", "transition", "signal",
              "cost", "terms"}


def parse_model(text: str, probe_bound: float = 10.0) -> Union[FiniteMDP, POMDPModel]:
    """Parse and validate a model document given as JSON text."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelSyntaxError(f"line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return model_from_dict(doc, probe_bound=probe_bound)


def load_model(path, probe_bound: float = 10.0):
    with open(path, encoding="utf-8") as fh:
        return parse_model(fh.read(), probe_bound=probe_bound)


def model_from_dict(doc, probe_bound: float = 10.0):
    if not isinstance(doc, dict):
        raise ModelSyntaxError("top level must be a JSON object")
    kind = doc.get("kind")
    if kind == "mdp":
        return _mdp_from_dict(doc, probe_bound)
    if kind == "pomdp":
        return _pomdp_from_dict(doc)
    raise ModelSyntaxError(f"'kind' must be 'mdp' or 'pomdp', got {kind!r}")


def _check_keys(doc, allowed, required, where):
    extra = set(doc) - allowed
    if extra:
        raise ModelSyntaxError(f"unknown keys in {where}: {sorted(extra)}")
    missing = required - set(doc)
    if missing:
        raise ModelSyntaxError(f"missing keys in {where}: {sorted(missing)}")


def _labels(doc, key):
    values = doc[key]
    if not isinstance(values, list) or not all(isinstance(v, (str, int)) for v in values):
        raise ModelSyntaxError(f"'{key}' must be a list of string or integer labels")
    labels = [str(v) for v in values]
    return labels, {v: i for i, v in enumerate(labels)}


def _lookup(index, label, what, where):
    try:
        return index[str(label)]
    except KeyError:
        raise ModelSyntaxError(f"unknown {what} {label!r} in {where}") from None


def _number(v, where):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ModelSyntaxError(f"expected a number in {where}, got {v!r}")
    return float(v)


def _mdp_from_dict(doc, probe_bound):
    _check_keys(doc, MDP_KEYS, MDP_REQUIRED, "mdp document")
    states, sidx = _labels(doc, "states")
    actions, aidx = _labels(doc, "actions")
    nx, na = len(states), len(actions)

    feasible = np.zeros((nx, na), dtype=bool)
    if "feasible" in doc:
        if not isinstance(doc["feasible"], dict):
            raise ModelSyntaxError("'feasible' must map states to action lists")
        for x, acts in doc["feasible"].items():
            xi = _lookup(sidx, x, "state", "feasible")
            for a in acts:
                feasible[xi, _lookup(aidx, a, "action", "feasible")] = True
    else:
        feasible[:] = True

    kernel = np.zeros((nx, na, nx))
    for row in doc["transitions"]:
        if not isinstance(row, list) or len(row) != 4:
            raise ModelSyntaxError(f"transition entries are [x, a, x', p], got {row!r}")
        x, a, y = (_lookup(sidx, row[0], "state", "transitions"),
                   _lookup(aidx, row[1], "action", "transitions"),
                   _lookup(sidx, row[2], "state", "transitions"))
        kernel[x, a, y] += _number(row[3], "transitions")

    cost_docs = doc["costs"]
    if not isinstance(cost_docs, list) or not cost_docs:
        raise ModelSyntaxError("'costs' must be a nonempty list")
    k = len(cost_docs)
    costs = np.full((k, nx, na, nx), np.nan)
    lower, upper, names = [], [], []
    for i, cdoc in enumerate(cost_docs):
        if not isinstance(cdoc, dict):
            raise ModelSyntaxError("each cost must be an object")
        _check_keys(cdoc, COST_KEYS, {"entries", "lower", "upper"}, f"cost #{i + 1}")
        names.append(str(cdoc.get("name", f"c{i + 1}")))
        if "default" in cdoc:
            costs[i] = _number(cdoc["default"], "cost default")
        for row in cdoc["entries"]:
            if not isinstance(row, list) or len(row) != 4:
                raise ModelSyntaxError(f"cost entries are [x, a, x', c], got {row!r}")
            x, a, y = (_lookup(sidx, row[0], "state", "costs"),
                       _lookup(aidx, row[1], "action", "costs"),
                       _lookup(sidx, row[2], "state", "costs"))
            costs[i, x, a, y] = _number(row[3], "costs")
        lower.append(_number(cdoc["lower"], "cost lower bound"))
        upper.append(_number(cdoc["upper"], "cost upper bound"))
    missing = np.isnan(costs) & (feasible[None, :, :, None] & (kernel[None] > 0))
    if missing.any():
        i, x, a, y = np.argwhere(missing)[0]
        raise ModelError(
            f"cost {names[i]!r} has no entry for possible transition "
            f"({states[x]!r}, {actions[a]!r}, {states[y]!r})"
        )
    costs = np.nan_to_num(costs, nan=0.0)

    utility = None
    if "utility" in doc:
        utility = utility_from_dict(doc["utility"], k, probe_bound=probe_bound)
    beta = doc.get("beta")
    discount = DiscountSpec(tuple(_number(b, "beta") for b in beta) if beta is not None else None)
    return FiniteMDP(
        states=states, actions=actions, feasible=feasible, kernel=kernel, costs=costs,
        lower=lower, upper=upper, cost_names=tuple(names),
        allow_zero_cost=bool(doc.get("allow_zero_cost", False)),
        utility=utility, discount=discount,
    )


def _pomdp_from_dict(doc):
    _check_keys(doc, POMDP_KEYS, POMDP_KEYS, "pomdp document")
    hidden, sidx = _labels(doc, "hidden_states")
    obs, yidx = _labels(doc, "observations")
    actions, aidx = _labels(doc, "actions")
    ns, ny, na = len(hidden), len(obs), len(actions)
    transition = np.zeros((na, ns, ns))
    for row in doc["transition"]:
        if not isinstance(row, list) or len(row) != 4:
            raise ModelSyntaxError(f"transition entries are [s, a, s', p], got {row!r}")
        s, a, t = (_lookup(sidx, row[0], "hidden state", "transition"),
                   _lookup(aidx, row[1], "action", "transition"),
                   _lookup(sidx, row[2], "hidden state", "transition"))
        transition[a, s, t] += _number(row[3], "transition")
    signal = np.zeros((ns, ny))
    for row in doc["signal"]:
        if not isinstance(row, list) or len(row) != 3:
            raise ModelSyntaxError(f"signal entries are [y, s, q], got {row!r}")
        y, s = _lookup(yidx, row[0], "observation", "signal"), _lookup(sidx, row[1], "hidden state", "signal")
        signal[s, y] += _number(row[2], "signal")
    cost = np.full((ns, na), np.nan)
    for row in doc["cost"]:
        if not isinstance(row, list) or len(row) != 3:
            raise ModelSyntaxError(f"cost entries are [s, a, c], got {row!r}")
        s, a = _lookup(sidx, row[0], "hidden state", "cost"), _lookup(aidx, row[1], "action", "cost")
        cost[s, a] = _number(row[2], "cost")
    if np.isnan(cost).any():
        s, a = np.argwhere(np.isnan(cost))[0]
        raise ModelError(f"no cost given for ({hidden[s]!r}, {actions[a]!r})")
    try:
        terms = tuple((_number(t["w"], "terms"), _number(t["lambda"], "terms")) for t in doc["terms"])
    except (KeyError, TypeError):
        raise ModelSyntaxError("terms must be a list of {\"w\": .., \"lambda\": ..}") from None
    for t in doc["terms"]:
        if set(t) - {"w", "lambda"}:
            raise ModelSyntaxError(f"unknown keys in term: {sorted(set(t) - {'w', 'lambda'})}")
    return POMDPModel(hidden, obs, actions, transition, signal, cost, terms)


def model_to_dict(model) -> dict:
    """Inverse of :func:`model_from_dict`; floats are written at full precision."""
    if isinstance(model, POMDPModel):
        if np.any(model.cost_offset != 0):
            raise ModelError("shifted POMDP models have no document form")
        S, Y, A = model.hidden_states, model.observations, model.actions
        return {
            "kind": "pomdp",
            "hidden_states": list(S),
            "observations": list(Y),
            "actions": list(A),
            "transition": [[S[s], A[a], S[t], float(model.transition[a, s, t])]
                           for a in range(len(A)) for s in range(len(S)) for t in range(len(S))
                           if model.transition[a, s, t] != 0],
            "signal": [[Y[y], S[s], float(model.signal[s, y])]
                       for s in range(len(S)) for y in range(len(Y)) if model.signal[s, y] != 0],
            "cost": [[S[s], A[a], float(model.cost[s, a])] for s in range(len(S)) for a in range(len(A))],
            "terms": [{"w": w, "lambda": lam} for w, lam in model.terms],
        }
    X, A = model.states, model.actions
    pairs = [(x, a) for x in range(len(X)) for a in range(len(A)) if model.feasible[x, a]]
    doc = {
        "kind": "mdp",
        "states": list(X),
        "actions": list(A),
        "feasible": {X[x]: [A[a] for a in model.feasible_actions(x)] for x in range(len(X))},
        "transitions": [[X[x], A[a], X[y], float(model.kernel[x, a, y])]
                        for x, a in pairs for y in range(len(X)) if model.kernel[x, a, y] > 0],
        "costs": [
            {
                "name": model.cost_names[i],
                "entries": [[X[x], A[a], X[y], float(model.costs[i, x, a, y])]
                            for x, a in pairs for y in range(len(X)) if model.kernel[x, a, y] > 0],
                "lower": float(model.lower[i]),
                "upper": float(model.upper[i]),
            }
            for i in range(model.n_objectives)
        ],
    }
    if model.utility is not None:
        doc["utility"] = model.utility.to_dict()
    if model.discount.beta is not None:
        doc["beta"] = list(model.discount.beta)
    if model.allow_zero_cost:
        doc["allow_zero_cost"] = True
    return doc


def dump_model(model) -> str:
    return json.dumps(model_to_dict(model), indent=1)
