"""Multivariate utilities over accumulated cost vectors, and discount vectors."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from ..errors import ModelError, UtilityError
from . import expr as _expr

# exp() overflows a double just above 709.78
_EXP_MAX = 709.0


@dataclass(frozen=True)
class SumOfExponentials:
    """``U(d) = sum_i w_i * sign(lam_i) * exp(lam_i * d_i)``, one coordinate per term."""

    terms: Tuple[Tuple[float, float], ...]

    def __post_init__(self):
        terms = tuple((float(w), float(lam)) for w, lam in self.terms)
        if not terms:
            raise UtilityError("sum of exponentials needs at least one term")
        for w, lam in terms:
            if not w > 0:
                raise UtilityError(f"weight must be positive, got {w}")
            if lam == 0 or not math.isfinite(lam):
                raise UtilityError(f"rate must be finite and nonzero, got {lam}")
        object.__setattr__(self, "terms", terms)

    @property
    def arity(self) -> int:
        return len(self.terms)

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for w, _ in self.terms])

    @property
    def rates(self) -> np.ndarray:
        return np.array([lam for _, lam in self.terms])

    def __call__(self, d):
        d = np.asarray(d, dtype=float)
        if d.shape[-1] != self.arity:
            raise UtilityError(f"expected {self.arity} cost coordinates, got {d.shape[-1]}")
        scaled = d * self.rates
        if np.any(scaled > _EXP_MAX):
            # factor the largest exponent out; only the final product can overflow
            top = scaled.max(axis=-1, keepdims=True)
            inner = (self.weights * np.sign(self.rates) * np.exp(scaled - top)).sum(axis=-1)
            with np.errstate(over="ignore"):
                out = inner * np.exp(top[..., 0])
        else:
            out = (self.weights * np.sign(self.rates) * np.exp(scaled)).sum(axis=-1)
        return float(out) if out.ndim == 0 else out

    def to_dict(self):
        return {"type": "sum_exp", "terms": [{"w": w, "lambda": lam} for w, lam in self.terms]}


@dataclass(frozen=True)
class Expression:
    """Utility given as a parsed arithmetic expression in ``d1 .. d<arity>``."""

    src: str
    arity: int
    ast: _expr.Node = None

    def __post_init__(self):
        if self.ast is None:
            object.__setattr__(self, "ast", _expr.parse_utility_expr(self.src, self.arity))

    def __call__(self, d):
        d = np.asarray(d, dtype=float)
        if d.shape[-1] != self.arity:
            raise UtilityError(f"expected {self.arity} cost coordinates, got {d.shape[-1]}")
        out = _expr.evaluate(self.ast, d)
        out = np.broadcast_to(out, d.shape[:-1]) if np.ndim(out) < d.ndim - 1 else out
        return float(out) if np.ndim(out) == 0 else np.asarray(out, dtype=float)

    def to_dict(self):
        return {"type": "expr", "src": self.src}


UtilitySpec = Union[SumOfExponentials, Expression]


def eval_utility(u: UtilitySpec, d: Sequence[float]) -> float:
    """Evaluate ``u`` at a single cost vector."""
    if len(d) != u.arity:
        raise UtilityError(f"expected {u.arity} cost coordinates, got {len(d)}")
    return float(u(np.asarray(d, dtype=float)))


def check_monotone(u: UtilitySpec, bound: float = 10.0, points: int = 9, rel_tol=1e-12):
    """Probe componentwise monotonicity on a grid over ``[0, bound]^arity``.

    Forward differences along every axis must be nonnegative up to ``rel_tol``.
    Raises :class:`UtilityError` on the first violation found.
    """
    k = u.arity
    points = max(2, min(points, int(round(4096 ** (1.0 / k)))))
    axis = np.linspace(0.0, bound, points)
    grid = np.array(list(itertools.product(axis, repeat=k)))
    h = bound / (points - 1) / 4
    base = u(grid)
    for j in range(k):
        step = grid.copy()
        step[:, j] += h
        diff = u(step) - base
        scale = np.maximum(1.0, np.abs(base))
        bad = np.nonzero(diff < -rel_tol * scale)[0]
        if bad.size:
            where = tuple(float(v) for v in grid[bad[0]])
            raise UtilityError(
                f"utility decreases along d{j + 1} near d={where} "
                f"(forward difference {float(diff[bad[0]]):.3g})"
            )


def utility_from_dict(doc, arity: int, probe_bound: float = 10.0) -> UtilitySpec:
    if not isinstance(doc, dict) or "type" not in doc:
        raise UtilityError("utility must be an object with a 'type' field")
    kind = doc["type"]
    if kind == "sum_exp":
        _only_keys(doc, {"type", "terms"}, "utility")
        try:
            terms = tuple((t["w"], t["lambda"]) for t in doc["terms"])
        except (KeyError, TypeError) as exc:
            raise UtilityError(f"malformed sum_exp terms: {exc}") from None
        u = SumOfExponentials(terms)
        if u.arity != arity:
            raise UtilityError(f"utility has {u.arity} terms but the model has {arity} costs")
        return u
    if kind == "expr":
        _only_keys(doc, {"type", "src"}, "utility")
        u = Expression(str(doc["src"]), arity)
        check_monotone(u, bound=probe_bound)
        return u
    raise UtilityError(f"unknown utility type {kind!r}")


def _only_keys(doc, allowed, where):
    extra = set(doc) - set(allowed)
    if extra:
        raise ModelError(f"unknown keys in {where}: {sorted(extra)}")


@dataclass(frozen=True)
class DiscountSpec:
    """Componentwise discount vector; ``beta=None`` means undiscounted."""

    beta: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        if self.beta is not None:
            beta = tuple(float(b) for b in self.beta)
            for b in beta:
                if not 0.0 < b < 1.0:
                    raise ModelError(f"discount factors must lie in (0, 1), got {b}")
            object.__setattr__(self, "beta", beta)

    @property
    def discounted(self) -> bool:
        return self.beta is not None

    def vector(self, arity: int) -> np.ndarray:
        if self.beta is None:
            return np.ones(arity)
        if len(self.beta) != arity:
            raise ModelError(f"beta has {len(self.beta)} entries, expected {arity}")
        return np.array(self.beta)

    @property
    def beta_max(self) -> float:
        return max(self.beta) if self.beta else 1.0


UNDISCOUNTED = DiscountSpec()
