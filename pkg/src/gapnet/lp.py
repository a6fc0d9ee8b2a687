"""Columns, bases and a lexicographic simplex for the restricted master problem.

The master LP has M task rows (every task covered once) and N convexity rows
(every agent picks one combination of its vertexes):

    max  sum_q (c_i' v_q) lambda_q
    s.t. sum_q v_q lambda_q = 1_M,  sum_{q owned by i} lambda_q = 1,  lambda >= 0.

A real column is [c_i' v; v; e_i]. Artificial columns are the identity
columns of R^{M+N} with cost -big_m and keep every restricted problem
feasible.

The simplex runs on a doubly perturbed problem: the right-hand side is
perturbed lexicographically (ratio test on the rows of [B^-1 b | B^-1]) and
the cost of the k-th column in `unique_id` order is lowered by delta^k. Both
perturbations make the optimal basis unique, so the result depends only on
the set of columns offered, never on their order or on the starting basis.
Among optimal solutions the perturbed cost selects the lexicographically
smallest one in `unique_id` order.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from gapnet.model import GapInstance

logger = logging.getLogger(__name__)

EPS_FEAS = 1e-9
EPS_RC = 1e-9
_EPS_PIVOT = 1e-9
_RESIDUAL_GUARD = 1e-6


class LpNumericalError(ArithmeticError):
    """Raised when the simplex meets a singular basis or fails to terminate."""


@dataclass(frozen=True)
class Column:
    """One variable of the master problem.

    For a real column `owner` is the agent and `vertex` the 0/1 task vector.
    For an artificial column `owner` is the row it covers and `vertex` is empty.
    """

    cost: float
    vertex: tuple[int, ...]
    owner: int
    is_artificial: bool = False

    @property
    def unique_id(self) -> tuple[int, int, tuple[int, ...]]:
        return (0 if self.is_artificial else 1, self.owner, self.vertex)

    def constraint(self, layout: MasterLayout) -> np.ndarray:
        """Return the column of the constraint matrix, a vector of R^{M+N}."""
        a = np.zeros(layout.rows)
        if self.is_artificial:
            a[self.owner] = 1.0
        else:
            a[: layout.n_tasks] = self.vertex
            a[layout.n_tasks + self.owner] = 1.0
        return a

    def serialize(self) -> str:
        bits = "".join(str(b) for b in self.vertex)
        return f"{self.owner}|{self.cost!r}|{bits}|{int(self.is_artificial)}"


def real_column(vertex: Sequence[int], owner: int, profits_row: np.ndarray) -> Column:
    """Price a vertex of agent `owner` with its profit row."""
    vertex = tuple(int(v) for v in vertex)
    return Column(cost=float(np.dot(profits_row, vertex)), vertex=vertex, owner=owner)


def artificial_column(row: int, big_m_cost: float) -> Column:
    return Column(cost=-float(big_m_cost), vertex=(), owner=row, is_artificial=True)


@dataclass(frozen=True)
class MasterLayout:
    """Shape of the master problem and the Big-M penalty of its artificials."""

    n_agents: int
    n_tasks: int
    big_m_cost: float

    @property
    def rows(self) -> int:
        return self.n_tasks + self.n_agents

    @classmethod
    def for_instance(cls, instance: GapInstance) -> MasterLayout:
        """Use big_m = 1 + sum |p|, which dominates any real objective."""
        big_m = 1.0 + float(np.abs(instance.profits).sum())
        return cls(n_agents=instance.n_agents, n_tasks=instance.n_tasks, big_m_cost=big_m)

    def artificials(self) -> list[Column]:
        return [artificial_column(r, self.big_m_cost) for r in range(self.rows)]


@dataclass(frozen=True)
class Basis:
    """An ordered set of M+N linearly independent columns."""

    columns: tuple[Column, ...]

    def __post_init__(self) -> None:
        ordered = tuple(sorted(self.columns, key=lambda c: c.unique_id))
        object.__setattr__(self, "columns", ordered)

    def __len__(self) -> int:
        return len(self.columns)

    def __contains__(self, column: object) -> bool:
        return isinstance(column, Column) and any(c.unique_id == column.unique_id for c in self.columns)

    def real_columns(self) -> tuple[Column, ...]:
        return tuple(c for c in self.columns if not c.is_artificial)

    def canonical(self) -> bytes:
        return "\n".join(c.serialize() for c in self.columns).encode()


def basis_key(basis: Basis) -> str:
    """Short stable hash of the canonical serialization."""
    return hashlib.sha1(basis.canonical()).hexdigest()[:12]


@dataclass(frozen=True, eq=False)
class LpSolution:
    """Optimal basis with its basic values and the duals (pi, mu)."""

    basis: Basis
    primal: np.ndarray
    pi: np.ndarray
    mu: np.ndarray
    objective: float


def big_m_basis(n_agents: int, n_tasks: int, big_m_cost: float) -> Basis:
    """All-artificial starting basis; its objective is -big_m (M+N)."""
    if big_m_cost <= 0:
        raise ValueError("big_m_cost must be positive")
    layout = MasterLayout(n_agents=n_agents, n_tasks=n_tasks, big_m_cost=big_m_cost)
    return Basis(tuple(layout.artificials()))


def reduced_cost(column: Column, pi: np.ndarray, mu: np.ndarray) -> float:
    """(c_i - pi)' v - mu_i for a real column."""
    if column.is_artificial:
        raise ValueError("reduced_cost is defined for real columns")
    return column.cost - float(np.dot(pi, column.vertex)) - float(mu[column.owner])


def _lex_min_row(rows: np.ndarray) -> int:
    """Index of the lexicographically smallest row, comparing with a tolerance."""
    alive = np.arange(rows.shape[0])
    for k in range(rows.shape[1]):
        values = rows[alive, k]
        low = values.min()
        alive = alive[values <= low + _EPS_PIVOT * (1.0 + abs(low))]
        if len(alive) == 1:
            break
    return int(alive[0])


def _lex_improves(j: int, column: np.ndarray, basic_positions: np.ndarray, eps: float) -> bool:
    """Sign of the perturbed reduced cost of column j when its true reduced cost is zero.

    The perturbation lowers the cost of the column at position k by delta^k,
    so the smallest position touched by the move decides: j itself (its value
    would grow, which is worse) or a basic variable whose value would shrink
    (better) or grow (worse).
    """
    touched = np.abs(column) > eps
    if not touched.any():
        return False
    rows = np.flatnonzero(touched)
    first = rows[np.argmin(basic_positions[rows])]
    if basic_positions[first] > j:
        return False
    return bool(column[first] > 0)


def _unique_columns(columns: Iterable[Column], layout: MasterLayout) -> list[Column]:
    pool = {c.unique_id: c for c in layout.artificials()}
    for c in columns:
        if not c.is_artificial:
            pool.setdefault(c.unique_id, c)
    return [pool[key] for key in sorted(pool)]


def solve_rmp(
    columns: Iterable[Column],
    layout: MasterLayout,
    *,
    start: Optional[Basis] = None,
    eps_feas: float = EPS_FEAS,
    eps_rc: float = EPS_RC,
) -> LpSolution:
    """Solve the restricted master problem over `columns` plus all artificials.

    `start` may name a lexicographically feasible basis made of offered
    columns (any basis returned by this function is); the optimum does not
    depend on it.
    """
    pool = _unique_columns(columns, layout)
    if start is not None:
        pool = _unique_columns([*pool, *start.columns], layout)
    position = {c.unique_id: k for k, c in enumerate(pool)}
    A = np.column_stack([c.constraint(layout) for c in pool])
    cost = np.array([c.cost for c in pool])
    b = np.ones(layout.rows)
    r, n = A.shape

    if start is None:
        basic = np.arange(r)  # artificials sort first, in row order
    else:
        basic = np.array([position[c.unique_id] for c in start.columns])

    is_basic = np.zeros(n, dtype=bool)
    for iteration in range(50 * (n + r)):
        try:
            b_inv = np.linalg.inv(A[:, basic])
        except np.linalg.LinAlgError as err:
            raise LpNumericalError("singular basis matrix") from err
        beta = b_inv @ b
        y = cost[basic] @ b_inv
        rc = cost - y @ A
        is_basic[:] = False
        is_basic[basic] = True
        rc[is_basic] = 0.0

        entering = -1
        if rc.max() > eps_rc:
            entering = int(np.argmax(rc))
        else:
            directions = b_inv @ A
            for j in np.flatnonzero(~is_basic & (np.abs(rc) <= eps_rc)):
                if _lex_improves(j, directions[:, j], basic, _EPS_PIVOT):
                    entering = int(j)
                    break
        if entering < 0:
            break

        d = b_inv @ A[:, entering]
        eligible = np.flatnonzero(d > _EPS_PIVOT)
        if len(eligible) == 0:
            raise LpNumericalError("unbounded direction in a bounded master problem")
        ratios = np.column_stack([beta[eligible], b_inv[eligible]]) / d[eligible, None]
        leaving = eligible[_lex_min_row(ratios)]
        basic[leaving] = entering
    else:
        raise LpNumericalError(f"simplex did not terminate after {iteration + 1} pivots")

    b_inv = np.linalg.inv(A[:, basic])
    beta = b_inv @ b
    if np.max(np.abs(A[:, basic] @ beta - b)) > _RESIDUAL_GUARD or beta.min() < -_RESIDUAL_GUARD:
        raise LpNumericalError("basic solution fails the feasibility guard")
    beta = np.where(np.abs(beta) <= eps_feas, 0.0, beta)
    y = cost[basic] @ b_inv

    order = sorted(range(r), key=lambda k: pool[basic[k]].unique_id)
    basis = Basis(tuple(pool[basic[k]] for k in order))
    primal = beta[order]
    objective = float(cost[basic] @ beta)
    return LpSolution(
        basis=basis,
        primal=primal,
        pi=y[: layout.n_tasks].copy(),
        mu=y[layout.n_tasks :].copy(),
        objective=objective,
    )


def pivot(
    basis: Basis,
    candidate: Column,
    candidate_reduced_cost: float,
    layout: MasterLayout,
    *,
    eps_rc: float = EPS_RC,
) -> Basis:
    """Bring an improving column into the basis and drop the non-basic remainder."""
    if candidate_reduced_cost <= eps_rc or candidate in basis:
        return basis
    return solve_rmp([*basis.columns, candidate], layout, start=basis, eps_rc=eps_rc).basis


def basic_values(basis: Basis, layout: MasterLayout) -> np.ndarray:
    """Solve A_B lambda = 1 for the basic values, aligned with `basis.columns`."""
    A_B = np.column_stack([c.constraint(layout) for c in basis.columns])
    try:
        values = np.linalg.solve(A_B, np.ones(layout.rows))
    except np.linalg.LinAlgError as err:
        raise LpNumericalError("basis columns are not independent") from err
    return values


def extract_solution(
    basis: Basis, layout: MasterLayout, *, eps_feas: float = EPS_FEAS
) -> tuple[np.ndarray, float, bool]:
    """Rebuild z_i = sum_q lambda_q v_q per owner.

    Returns (z, cost, contains_artificial); cost excludes artificial
    penalties and contains_artificial flags an artificial with positive value.
    """
    values = basic_values(basis, layout)
    z = np.zeros((layout.n_agents, layout.n_tasks))
    cost = 0.0
    contains_artificial = False
    for column, value in zip(basis.columns, values):
        if column.is_artificial:
            contains_artificial |= bool(value > eps_feas)
            continue
        if abs(value) <= eps_feas:
            continue
        z[column.owner] += value * np.asarray(column.vertex, dtype=float)
        cost += value * column.cost
    return z, cost, contains_artificial


def certificate(solution: LpSolution, columns: Iterable[Column], layout: MasterLayout) -> tuple[float, float]:
    """Return (primal residual, largest reduced cost over `columns` and the artificials)."""
    A_B = np.column_stack([c.constraint(layout) for c in solution.basis.columns])
    residual = float(np.max(np.abs(A_B @ solution.primal - 1.0)))
    y = np.concatenate([solution.pi, solution.mu])
    worst = max(c.cost - float(y @ c.constraint(layout)) for c in _unique_columns(columns, layout))
    return residual, worst
