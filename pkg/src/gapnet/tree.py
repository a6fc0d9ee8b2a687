"""Branching tree: depth-first stack of master problems and the incumbent rules."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from gapnet.lp import Basis, MasterLayout, basic_values, extract_solution
from gapnet.pricing import FixingSet

logger = logging.getLogger(__name__)

EPS_INT = 1e-6


class BranchError(ValueError):
    """Raised when branching is asked for on an integral solution."""


class NodeAction(str, Enum):
    """What to do with a solved node."""

    UPDATE_INCUMBENT = "update-incumbent"
    BRANCH = "branch"
    PRUNE = "prune"


@dataclass(frozen=True)
class BranchNode:
    """A master problem defined by per-agent fixings."""

    fixings: tuple[FixingSet, ...]
    depth: int = 0
    creation_order: int = 0

    @classmethod
    def root(cls, n_agents: int) -> BranchNode:
        return cls(fixings=tuple(FixingSet() for _ in range(n_agents)))

    def fixings_for(self, agent: int) -> FixingSet:
        """The constraints agent `agent` needs to define its local set."""
        return self.fixings[agent]


@dataclass
class Tree:
    """Stack of unsolved nodes, extracted last in, first out."""

    stack: list[BranchNode] = field(default_factory=list)
    next_label: int = 0
    created: int = 0
    max_stored: int = 0

    @classmethod
    def with_root(cls, n_agents: int) -> Tree:
        tree = cls()
        tree.push(BranchNode.root(n_agents))
        return tree

    def push(self, node: BranchNode) -> None:
        self.stack.append(node)
        self.created += 1
        self.max_stored = max(self.max_stored, len(self.stack))

    def __len__(self) -> int:
        return len(self.stack)

    def copy(self) -> Tree:
        return Tree(
            stack=list(self.stack),
            next_label=self.next_label,
            created=self.created,
            max_stored=self.max_stored,
        )


@dataclass(frozen=True, eq=False)
class NodeOutcome:
    """Solution of a converged node as read from its basis."""

    z: np.ndarray
    cost: float
    infeasible: bool
    integral: bool


def is_integral(z: np.ndarray, eps_int: float = EPS_INT) -> bool:
    return bool(np.all(np.abs(z - np.round(z)) <= eps_int))


def assess(basis: Basis, layout: MasterLayout, eps_int: float = EPS_INT) -> NodeOutcome:
    """ExtractSol: z and cost from a basis, with exact costs for integral z."""
    z, cost, contains_artificial = extract_solution(basis, layout)
    integral = not contains_artificial and is_integral(z, eps_int)
    if integral:
        values = basic_values(basis, layout)
        # an integral z forces integral combiners, so the cost is a sum of column costs
        cost = float(sum(c.cost for c, v in zip(basis.columns, values) if not c.is_artificial and v > 0.5))
        z = np.round(z)
    return NodeOutcome(z=z, cost=cost, infeasible=contains_artificial, integral=integral)


def branch(tree: Tree, z: np.ndarray, parent: BranchNode, eps_int: float = EPS_INT) -> Tree:
    """Branch on the first fractional entry of z in agent-major order.

    The child with z[i, m] = 1 (and m fixed to 0 for every other agent) is
    pushed first, then the child with z[i, m] = 0, which is extracted next.
    """
    fractional = np.argwhere(np.abs(z - np.round(z)) > eps_int)
    if len(fractional) == 0:
        raise BranchError("cannot branch on an integral solution")
    i, m = (int(v) for v in fractional[0])
    take = tuple(
        f.with_fixing(m, 1 if agent == i else 0) for agent, f in enumerate(parent.fixings)
    )
    leave = tuple(f.with_fixing(m, 0) if agent == i else f for agent, f in enumerate(parent.fixings))
    depth = parent.depth + 1
    tree.push(BranchNode(fixings=take, depth=depth, creation_order=tree.created))
    tree.push(BranchNode(fixings=leave, depth=depth, creation_order=tree.created))
    logger.debug(f"branched on agent {i} task {m} at depth {parent.depth}; {len(tree)} stored")
    return tree


def extract(tree: Tree) -> Optional[tuple[int, BranchNode]]:
    """Pop the next node and give it the next label; None when the tree is empty."""
    if not tree.stack:
        return None
    node = tree.stack.pop()
    label = tree.next_label
    tree.next_label += 1
    return label, node


def consider(
    node_cost: float,
    node_z: Optional[np.ndarray],
    incumbent: float,
    *,
    infeasible: bool = False,
    eps_int: float = EPS_INT,
) -> NodeAction:
    """Incumbent update, branch or prune for a solved node.

    Ties with the incumbent are not pruned; only a strictly worse bound is.
    """
    if infeasible or node_z is None or node_cost < incumbent:
        return NodeAction.PRUNE
    if is_integral(node_z, eps_int):
        return NodeAction.UPDATE_INCUMBENT
    return NodeAction.BRANCH


NO_INCUMBENT = -math.inf
