"""Two-armed investment bandit with utility ``U(g, s) = g^2 + mu*s``.

Each period a fraction ``a`` of one unit goes to gold and ``1 - a`` to
silver.  The state ``x = (x_g, x_s)`` in ``{0,1}^2`` says which assets pay
out; the next state is uniform on the four outcomes regardless of the action.
The cost charged on a move to ``x'`` is ``(a*x'_g, (1-a)*x'_s)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core.model import FiniteMDP
from .core.utility import Expression

STATES = ("00", "01", "10", "11")  # x_g x_s


@dataclass(frozen=True)
class BanditParams:
    mu: float = 1.0
    m: int = 5

    def __post_init__(self):
        if not 0 < self.mu <= 2:
            raise ValueError(f"mu must lie in (0, 2], got {self.mu}")
        if self.m < 2:
            raise ValueError("the action grid needs at least two points")

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.m)


def _coefficients(n: int):
    h = 2.0 ** -n
    return h, 1.0 - h, h / 4.0 - 0.25, n / 2.0


def analytic_value(n: int, g: float, s: float, mu: float) -> float:
    """Optimal expected utility with ``n`` periods left and holdings ``(g, s)``."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    if g < 0 or s < 0:
        raise ValueError("accumulated holdings must be nonnegative")
    if g < mu / 2:
        c1, c2, c3, c4 = _coefficients(n)
        return c1 * g * g + c2 * mu * g + mu * s + c3 * mu * mu + c4 * mu
    return g * g + mu * s + n * mu / 2


def analytic_action(g: float, mu: float) -> float:
    """Optimal gold fraction; it does not depend on the number of periods left."""
    if g < 0:
        raise ValueError("g must be nonnegative")
    return min(max(mu / 2 - g, 0.0), 1.0)


def one_step(g: float, s: float, a: float, mu: float) -> float:
    """Expected terminal utility after one period at fraction ``a``."""
    return 0.25 * (2 * g * g + 2 * mu * s + 2 * (g + a) ** 2 + 2 * mu * (s + 1 - a))


def action_label(a: float) -> str:
    return format(float(a), "g")


def as_mdp(p: BanditParams) -> FiniteMDP:
    """Discretized-action bandit; zero costs occur, so it is finite-horizon only."""
    grid = p.grid
    nx, na = len(STATES), len(grid)
    kernel = np.full((nx, na, nx), 0.25)
    costs = np.zeros((2, nx, na, nx))
    for y, lab in enumerate(STATES):
        xg, xs = int(lab[0]), int(lab[1])
        costs[0, :, :, y] = grid[None, :] * xg
        costs[1, :, :, y] = (1.0 - grid[None, :]) * xs
    src = f"d1^2 + {float(p.mu)!r}*d2"
    utility = Expression(src, 2)
    return FiniteMDP(
        states=STATES,
        actions=[action_label(a) for a in grid],
        feasible=np.ones((nx, na), dtype=bool),
        kernel=kernel,
        costs=costs,
        lower=[0.0, 0.0],
        upper=[1.0, 1.0],
        cost_names=("gold", "silver"),
        allow_zero_cost=True,
        utility=utility,
    )
