"""GAP instances, benchmark generators and the exhaustive oracle.

An instance holds N agents and M tasks. `profits[i, m]` is earned when agent
i takes task m, which consumes `weights[i, m]` of its capacity
`capacities[i]`. Every task goes to exactly one agent.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import IO, Optional, Sequence, Union

import numpy as np

logger = logging.getLogger(__name__)

MODELS = ("A", "B", "C", "D")
MODEL_B_SCALE = 0.7
MODEL_C_SCALE = 0.8

Assignment = np.ndarray
"""N x M binary matrix; row i is the vector z_i of tasks taken by agent i."""


class DimensionError(ValueError):
    """Raised when matrices and vectors do not agree on N and M."""


class OracleTooLargeError(ValueError):
    """Raised when an instance is too large for exhaustive enumeration."""


class InstanceFormatError(ValueError):
    """Raised when an instance file cannot be parsed."""


class Status(str, Enum):
    """Outcome of a solve."""

    OPTIMAL = "optimal"
    FEASIBLE = "feasible-suboptimal"
    INFEASIBLE = "infeasible"


def _frozen(values: Sequence, ndim: int) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim != ndim:
        raise DimensionError(f"expected a {ndim}-d array, got shape {arr.shape}")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class GapInstance:
    """Profits, weights and capacities of a Generalized Assignment Problem."""

    profits: np.ndarray
    weights: np.ndarray
    capacities: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "profits", _frozen(self.profits, 2))
        object.__setattr__(self, "weights", _frozen(self.weights, 2))
        object.__setattr__(self, "capacities", _frozen(self.capacities, 1))
        n, m = self.profits.shape
        if n < 1 or m < 1:
            raise DimensionError("an instance needs at least one agent and one task")
        if self.weights.shape != (n, m):
            raise DimensionError(f"weights have shape {self.weights.shape}, expected {(n, m)}")
        if self.capacities.shape != (n,):
            raise DimensionError(f"capacities have shape {self.capacities.shape}, expected ({n},)")
        if np.any(self.weights < 0):
            raise ValueError("weights must be nonnegative")

    @property
    def n_agents(self) -> int:
        return self.profits.shape[0]

    @property
    def n_tasks(self) -> int:
        return self.profits.shape[1]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GapInstance):
            return NotImplemented
        return (
            np.array_equal(self.profits, other.profits)
            and np.array_equal(self.weights, other.weights)
            and np.array_equal(self.capacities, other.capacities)
        )

    def __hash__(self) -> int:
        return hash((self.profits.tobytes(), self.weights.tobytes(), self.capacities.tobytes()))


@dataclass(frozen=True)
class Violation:
    """A constraint of the GAP that an assignment breaks.

    `kind` is "task-unassigned", "task-multiply-assigned" or
    "capacity-exceeded"; `index` is the 0-based task or agent.
    """

    kind: str
    index: int
    detail: str


@dataclass(frozen=True, eq=False)
class SolveReport:
    """Cost, assignment and status of a solve."""

    cost: Optional[float]
    assignment: Optional[Assignment]
    status: Status


def assignment_from_choice(choice: Sequence[int], n_agents: int) -> Assignment:
    """Build the N x M matrix from a task -> agent vector."""
    x = np.zeros((n_agents, len(choice)), dtype=np.int8)
    for m, i in enumerate(choice):
        x[i, m] = 1
    return x


def assignment_choice(x: Assignment) -> list[int]:
    """Return, for each task, the agent it is assigned to (-1 if none)."""
    x = np.asarray(x)
    choice = []
    for m in range(x.shape[1]):
        owners = np.flatnonzero(x[:, m] > 0.5)
        choice.append(int(owners[0]) if len(owners) else -1)
    return choice


def evaluate(instance: GapInstance, assignment: Assignment) -> Union[float, Violation]:
    """Return the profit of a feasible assignment, else the first violated constraint."""
    x = np.asarray(assignment)
    if x.shape != (instance.n_agents, instance.n_tasks):
        raise DimensionError(
            f"assignment has shape {x.shape}, expected {(instance.n_agents, instance.n_tasks)}"
        )
    if not np.all((x == 0) | (x == 1)):
        raise ValueError("assignment entries must be 0 or 1")
    per_task = x.sum(axis=0)
    for m, count in enumerate(per_task):
        if count == 0:
            return Violation("task-unassigned", m, f"task {m + 1} is not assigned")
        if count > 1:
            return Violation("task-multiply-assigned", m, f"task {m + 1} is assigned {int(count)} times")
    loads = (instance.weights * x).sum(axis=1)
    for i, (load, cap) in enumerate(zip(loads, instance.capacities)):
        if load > cap:
            return Violation("capacity-exceeded", i, f"agent {i + 1} uses {load:g} > {cap:g}")
    return float((instance.profits * x).sum())


def model_a_capacities(profits: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """g = 9 M/N + 0.4 max_l sum of w[l, m] over the tasks where l has the lowest profit."""
    n, m = profits.shape
    # argmin returns the lowest agent index on ties
    cheapest = np.argmin(profits, axis=0)
    sums = np.array([weights[i, cheapest == i].sum() for i in range(n)])
    return np.full(n, 9.0 * m / n + 0.4 * sums.max())


def model_b_capacities(capacities_a: np.ndarray) -> np.ndarray:
    return MODEL_B_SCALE * np.asarray(capacities_a, dtype=float)


def model_c_capacities(weights: np.ndarray) -> np.ndarray:
    """g_i = 0.8 sum_m w[i, m] / N."""
    weights = np.asarray(weights, dtype=float)
    return MODEL_C_SCALE * weights.sum(axis=1) / weights.shape[0]


def model_d_profits(weights: np.ndarray, k: np.ndarray) -> np.ndarray:
    return 100.0 - np.asarray(weights, dtype=float) + np.asarray(k, dtype=float)


def generate(model: str, n_agents: int, n_tasks: int, seed: int) -> GapInstance:
    """Draw a random instance of benchmark Model A, B, C or D.

    Models A, B and C share the same weight and profit draws for a given seed
    and differ only in capacities.
    """
    model = model.upper()
    if model not in MODELS:
        raise ValueError(f"unknown model {model!r}; expected one of {MODELS}")
    if n_agents < 1 or n_tasks < 1:
        raise ValueError("n_agents and n_tasks must be positive")
    rng = np.random.default_rng(seed)
    shape = (n_agents, n_tasks)
    if model == "D":
        weights = rng.integers(1, 101, size=shape)
        k = rng.integers(1, 22, size=shape)
        profits = model_d_profits(weights, k)
        capacities = model_c_capacities(weights)
    else:
        weights = rng.integers(10, 26, size=shape)
        profits = rng.integers(5, 26, size=shape)
        if model == "A":
            capacities = model_a_capacities(profits, weights)
        elif model == "B":
            capacities = model_b_capacities(model_a_capacities(profits, weights))
        else:
            capacities = model_c_capacities(weights)
    logger.debug(f"generated model {model} instance N={n_agents} M={n_tasks} seed={seed}")
    return GapInstance(profits=profits, weights=weights, capacities=capacities)


def oracle_solve(instance: GapInstance, guard: int = 24) -> SolveReport:
    """Solve exactly by enumerating, task by task, which agent takes it."""
    n, m = instance.n_agents, instance.n_tasks
    if n * m > guard:
        raise OracleTooLargeError(f"N*M = {n * m} exceeds the oracle guard {guard}")
    p, w = instance.profits, instance.weights
    # optimistic completion value of tasks m.. onwards
    tail = np.concatenate([np.cumsum(p.max(axis=0)[::-1])[::-1], [0.0]])
    remaining = instance.capacities.astype(float).copy()
    choice = [0] * m
    best_cost = -math.inf
    best_choice: Optional[list[int]] = None

    def descend(task: int, value: float) -> None:
        nonlocal best_cost, best_choice
        if task == m:
            if value > best_cost:
                best_cost, best_choice = value, list(choice)
            return
        if value + tail[task] <= best_cost:
            return
        for i in range(n):
            if w[i, task] <= remaining[i]:
                remaining[i] -= w[i, task]
                choice[task] = i
                descend(task + 1, value + p[i, task])
                remaining[i] += w[i, task]

    descend(0, 0.0)
    if best_choice is None:
        return SolveReport(cost=None, assignment=None, status=Status.INFEASIBLE)
    return SolveReport(
        cost=float(best_cost),
        assignment=assignment_from_choice(best_choice, n),
        status=Status.OPTIMAL,
    )


def _fmt(value: float) -> str:
    value = float(value)
    return str(int(value)) if value.is_integer() else repr(value)


def write_instance(instance: GapInstance, out: Union[str, Path, IO[str]]) -> None:
    """Write the line-oriented text format: `N M`, profit rows, weight rows, capacities."""
    lines = [f"{instance.n_agents} {instance.n_tasks}"]
    lines += [" ".join(_fmt(v) for v in row) for row in instance.profits]
    lines += [" ".join(_fmt(v) for v in row) for row in instance.weights]
    lines.append(" ".join(_fmt(v) for v in instance.capacities))
    text = "\n".join(lines) + "\n"
    if isinstance(out, (str, Path)):
        Path(out).write_text(text)
    else:
        out.write(text)


def read_instance(source: Union[str, Path, IO[str]]) -> GapInstance:
    """Parse the text format written by `write_instance`."""
    text = Path(source).read_text() if isinstance(source, (str, Path)) else source.read()
    rows = [(no, line.split()) for no, line in enumerate(text.splitlines(), start=1) if line.strip()]
    if not rows:
        raise InstanceFormatError("empty instance file")

    def numbers(no: int, tokens: list[str], expected: int) -> list[float]:
        if len(tokens) != expected:
            raise InstanceFormatError(f"line {no}: expected {expected} values, got {len(tokens)}")
        try:
            return [float(t) for t in tokens]
        except ValueError as err:
            raise InstanceFormatError(f"line {no}: {err}") from err

    head_no, head = rows[0]
    try:
        n, m = (int(t) for t in head)
    except ValueError as err:
        raise InstanceFormatError(f"line {head_no}: expected `N M`") from err
    if len(rows) != 2 * n + 2:
        raise InstanceFormatError(f"expected {2 * n + 2} non-empty lines, got {len(rows)}")
    profits = [numbers(no, tokens, m) for no, tokens in rows[1 : n + 1]]
    weights = [numbers(no, tokens, m) for no, tokens in rows[n + 1 : 2 * n + 1]]
    capacities = numbers(*rows[-1], n)
    return GapInstance(profits=profits, weights=weights, capacities=capacities)
