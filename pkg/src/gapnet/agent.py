"""Per-agent state machine of the distributed branch-and-price algorithm.

Each round an agent either keeps generating columns for the node it is
solving or moves on to the next node, after detecting
convergence itself or seeing a neighbor with a larger label.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence

import numpy as np

from gapnet.lp import (
    EPS_FEAS,
    EPS_RC,
    Basis,
    Column,
    MasterLayout,
    basis_key,
    pivot,
    real_column,
    solve_rmp,
)
from gapnet.model import GapInstance
from gapnet.pricing import FixingSet, solve_pricing
from gapnet.tree import (
    EPS_INT,
    NO_INCUMBENT,
    BranchNode,
    NodeAction,
    Tree,
    assess,
    branch,
    consider,
    extract,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class AgentSetup:
    """What agent i knows: its own data and the shared N, L and Big-M."""

    id: int
    profits_row: np.ndarray
    weights_row: np.ndarray
    capacity: float
    layout: MasterLayout
    period: int = 1
    first_incumbent: bool = False
    eps_feas: float = EPS_FEAS
    eps_rc: float = EPS_RC
    eps_int: float = EPS_INT

    @classmethod
    def for_agents(
        cls, instance: GapInstance, period: int, *, first_incumbent: bool = False, **tolerances: float
    ) -> list[AgentSetup]:
        layout = MasterLayout.for_instance(instance)
        return [
            cls(
                id=i,
                profits_row=instance.profits[i],
                weights_row=instance.weights[i],
                capacity=float(instance.capacities[i]),
                layout=layout,
                period=period,
                first_incumbent=first_incumbent,
                **tolerances,
            )
            for i in range(instance.n_agents)
        ]

    @property
    def threshold(self) -> int:
        """Rounds without basis change after which the node counts as solved: 2NL+1."""
        return 2 * self.layout.n_agents * self.period + 1


@dataclass(frozen=True)
class Message:
    """A neighbor's candidate basis (real columns only) and label."""

    sender: int
    basis: Basis
    label: int


@dataclass(eq=False)
class AgentState:
    """Local state of one agent."""

    id: int
    basis: Basis
    label: int = 0
    """Index of the tree node the agent is solving."""

    incumbent_cost: float = NO_INCUMBENT
    incumbent_z: Optional[np.ndarray] = None
    fixings: FixingSet = field(default_factory=FixingSet)
    node: Optional[BranchNode] = None
    """Node being solved; None in the cloud-assisted variant."""

    tree: Optional[Tree] = None
    """Pending nodes; None in the cloud-assisted variant, where the cloud owns the tree."""

    unchanged_rounds: int = 0
    halted: bool = False
    awaiting_cloud: bool = False
    """Cloud variant: the converged basis for the current label has been uploaded."""

    last_event: str = "init"
    solved_basis: Optional[Basis] = None
    """Basis the last node transition read its solution from."""

    @property
    def stored_nodes(self) -> int:
        return self.tree.max_stored if self.tree is not None else 0


def restart_basis(own_columns: Iterable[Column], fixings: FixingSet, setup: AgentSetup) -> Basis:
    """Big-M artificials plus the agent's own columns that still satisfy the new fixings."""
    kept = [
        c
        for c in own_columns
        if not c.is_artificial and c.owner == setup.id and fixings.admits(c.vertex)
    ]
    return solve_rmp(kept, setup.layout, eps_feas=setup.eps_feas, eps_rc=setup.eps_rc).basis


def initial_state(setup: AgentSetup, *, with_tree: bool = True) -> AgentState:
    """Algorithm start: Big-M basis, no incumbent, label 0 on the root node."""
    basis = restart_basis((), FixingSet(), setup)
    if not with_tree:
        return AgentState(id=setup.id, basis=basis)
    tree = Tree.with_root(setup.layout.n_agents)
    label, root = extract(tree)
    return AgentState(id=setup.id, basis=basis, label=label, node=root, tree=tree)


def outbound(state: AgentState) -> Message:
    return Message(sender=state.id, basis=Basis(state.basis.real_columns()), label=state.label)


def detect_convergence(state: AgentState, n_agents: int, period: int) -> bool:
    """True once the basis has not changed for 2NL+1 rounds."""
    return state.unchanged_rounds >= 2 * n_agents * period + 1


def generate_columns(state: AgentState, inbox: Sequence[Message], setup: AgentSetup) -> AgentState:
    """Merge same-label neighbor bases, solve the local master, price and pivot."""
    merged: list[Column] = list(state.basis.real_columns())
    for message in inbox:
        if message.label == state.label:
            merged.extend(message.basis.columns)
    solution = solve_rmp(
        merged, setup.layout, start=state.basis, eps_feas=setup.eps_feas, eps_rc=setup.eps_rc
    )
    new_basis = solution.basis
    priced = solve_pricing(
        setup.profits_row,
        setup.weights_row,
        setup.capacity,
        solution.pi,
        solution.mu[setup.id],
        state.fixings,
    )
    if priced is not None:
        candidate = real_column(priced.vertex, setup.id, setup.profits_row)
        new_basis = pivot(new_basis, candidate, priced.reduced_cost, setup.layout, eps_rc=setup.eps_rc)
    unchanged = state.unchanged_rounds + 1 if new_basis == state.basis else 0
    return replace(state, basis=new_basis, unchanged_rounds=unchanged, last_event="generate")


def next_node(state: AgentState, setup: AgentSetup) -> AgentState:
    """Read the node solution, update the incumbent or branch, then move to the next label."""
    outcome = assess(state.basis, setup.layout, setup.eps_int)
    action = consider(
        outcome.cost,
        outcome.z,
        state.incumbent_cost,
        infeasible=outcome.infeasible,
        eps_int=setup.eps_int,
    )
    tree = state.tree.copy()
    state = replace(
        state,
        label=state.label + 1,
        tree=tree,
        unchanged_rounds=0,
        solved_basis=state.basis,
        last_event=action.value,
    )
    if action is NodeAction.UPDATE_INCUMBENT:
        state.incumbent_cost = outcome.cost
        state.incumbent_z = outcome.z.astype(np.int8)
        logger.debug(f"agent {setup.id}: incumbent {outcome.cost:g} at label {state.label - 1}")
        if setup.first_incumbent:
            state.halted = True
            return state
    elif action is NodeAction.BRANCH:
        branch(tree, outcome.z, state.node, setup.eps_int)

    extracted = extract(tree)
    if extracted is None:
        state.halted = True
        state.last_event = f"{action.value}+halt"
        return state
    _, node = extracted
    fixings = node.fixings_for(setup.id)
    state.node = node
    state.fixings = fixings
    state.basis = restart_basis(state.basis.columns, fixings, setup)
    return state


def step(state: AgentState, inbox: Sequence[Message], setup: AgentSetup) -> tuple[AgentState, Message]:
    """One round of the purely distributed algorithm for one agent."""
    if state.halted:
        raise ValueError(f"agent {state.id} has halted")
    if not any(message.label > state.label for message in inbox):
        state = generate_columns(state, inbox, setup)
        if not detect_convergence(state, setup.layout.n_agents, setup.period):
            return state, outbound(state)
        logger.debug(f"agent {setup.id}: converged on label {state.label} basis {basis_key(state.basis)}")
    state = next_node(state, setup)
    return state, outbound(state)


def cloud_step(state: AgentState, inbox: Sequence[Message], setup: AgentSetup) -> tuple[AgentState, Message]:
    """One round of the cloud-assisted variant: column generation only.

    On convergence the agent flags its basis for upload and keeps generating
    columns until the cloud broadcasts the next node.
    """
    if state.halted:
        raise ValueError(f"agent {state.id} has halted")
    state = generate_columns(state, inbox, setup)
    if not state.awaiting_cloud and detect_convergence(state, setup.layout.n_agents, setup.period):
        state.awaiting_cloud = True
        state.last_event = "upload"
    return state, outbound(state)


def enter_node(state: AgentState, label: int, fixings: FixingSet, setup: AgentSetup) -> AgentState:
    """Apply a cloud broadcast: new label, new local fixings, restarted basis."""
    return replace(
        state,
        label=label,
        fixings=fixings,
        basis=restart_basis(state.basis.columns, fixings, setup),
        unchanged_rounds=0,
        awaiting_cloud=False,
        last_event="broadcast",
    )
