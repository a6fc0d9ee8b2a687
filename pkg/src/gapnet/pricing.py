"""Knapsack pricing: the column an agent proposes to the master problem.

Agent i maximizes (c_i - pi)' z over binary z with D_i z <= g_i and the
branching fixings of the node it is solving. Weights are integers in every
benchmark model, so the capacity is floored and the dynamic program runs
over integer capacity states.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from types import MappingProxyType
from typing import Mapping, Optional, Sequence

import numpy as np

_TIE = 1e-9


@dataclass(frozen=True)
class FixingSet:
    """Branching fixings of one agent: task -> 0 or 1."""

    fixed: Mapping[int, int] = MappingProxyType({})

    def __post_init__(self) -> None:
        for task, value in self.fixed.items():
            if value not in (0, 1):
                raise ValueError(f"task {task} fixed to {value}; fixings are 0 or 1")
        object.__setattr__(self, "fixed", MappingProxyType(dict(sorted(self.fixed.items()))))

    def __len__(self) -> int:
        return len(self.fixed)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FixingSet):
            return NotImplemented
        return dict(self.fixed) == dict(other.fixed)

    def __hash__(self) -> int:
        return hash(tuple(self.fixed.items()))

    def with_fixing(self, task: int, value: int) -> FixingSet:
        """Return a copy with one more fixing; a conflicting fixing is an error."""
        if self.fixed.get(task, value) != value:
            raise ValueError(f"task {task} is already fixed to {self.fixed[task]}")
        return FixingSet({**self.fixed, task: value})

    def admits(self, vertex: Sequence[int]) -> bool:
        """Whether a vertex respects every fixing."""
        return all(vertex[task] == value for task, value in self.fixed.items())


@dataclass(frozen=True)
class PricedVertex:
    """Best vertex for the current duals, its pricing value and reduced cost."""

    vertex: tuple[int, ...]
    pricing_value: float
    reduced_cost: float


def solve_pricing(
    profits_row: Sequence[float],
    weights_row: Sequence[float],
    capacity: float,
    pi: Sequence[float],
    mu_i: float,
    fixings: FixingSet = FixingSet(),
) -> Optional[PricedVertex]:
    """Solve the pricing knapsack exactly; None when the fixings alone do not fit.

    Among optimal vertexes the lexicographically smallest bit string wins.
    """
    values = np.asarray(profits_row, dtype=float) - np.asarray(pi, dtype=float)
    weights = np.asarray(weights_row, dtype=float)
    if np.any(weights < 0):
        raise ValueError("weights must be nonnegative")
    m = len(values)
    if np.any(weights != np.round(weights)):
        raise ValueError("pricing needs integer weights")
    weights = weights.astype(int)

    ones = [k for k, v in fixings.fixed.items() if v == 1]
    spare = math.floor(capacity + _TIE) - int(weights[ones].sum())
    if spare < 0:
        return None
    free = [k for k in range(m) if k not in fixings.fixed]

    # best[j, s]: best value of free items j.. with s capacity left
    best = np.zeros((len(free) + 1, spare + 1))
    for j in range(len(free) - 1, -1, -1):
        k = free[j]
        best[j] = best[j + 1]
        w = weights[k]
        if w <= spare:
            take = best[j + 1, : spare + 1 - w] + values[k]
            best[j, w:] = np.maximum(best[j + 1, w:], take)

    vertex = [0] * m
    for k in ones:
        vertex[k] = 1
    s = spare
    for j, k in enumerate(free):
        # leave the item out whenever that is still optimal: smallest bit string
        if best[j + 1, s] >= best[j, s] - _TIE:
            continue
        vertex[k] = 1
        s -= weights[k]

    pricing_value = float(values[ones].sum() + best[0, spare])
    return PricedVertex(
        vertex=tuple(vertex),
        pricing_value=pricing_value,
        reduced_cost=pricing_value - float(mu_i),
    )
