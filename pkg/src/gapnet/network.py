"""Round-based execution over time-varying communication graphs.

Time is slotted. In round t every non-halted agent reads the latest message
of each in-neighbor along the edges active at t (the messages produced in
round t-1), steps once, and publishes a new message. A halted agent's last
message stays readable.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import networkx as nx
import numpy as np

from gapnet.agent import AgentSetup, AgentState, Message, initial_state, outbound, step
from gapnet.configuration import GRAPH_KINDS, Configuration
from gapnet.lp import basis_key
from gapnet.model import GapInstance, Status
from gapnet.tree import NodeAction

logger = logging.getLogger(__name__)

Edge = tuple[int, int]
NODE_EVENTS = frozenset(a.value for a in NodeAction)


class RoundCapExceeded(RuntimeError):
    """Raised when a run reaches the round cap before every agent halts."""

    def __init__(self, message: str, metrics: Optional[RunMetrics] = None):
        super().__init__(message)
        self.metrics = metrics


@dataclass(frozen=True)
class NetworkSchedule:
    """A periodic time-varying digraph over agents 0..N-1.

    `kind` is "cycle" (edges i -> i+1 every round, L=1), "complete" (all
    edges every round, L=1), "periodic-edge" (round t activates only
    t mod N -> t+1 mod N, L=N) or "custom", which repeats `pattern`.
    """

    n_agents: int
    kind: str = "cycle"
    pattern: tuple[frozenset[Edge], ...] = ()
    connectivity_period: Optional[int] = None

    def __post_init__(self) -> None:
        if self.kind not in (*GRAPH_KINDS, "custom"):
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if self.kind == "custom" and not self.pattern:
            raise ValueError("a custom schedule needs a non-empty pattern")

    @property
    def period(self) -> int:
        """The L of L-strong connectivity the agents are told."""
        if self.connectivity_period is not None:
            return self.connectivity_period
        if self.kind == "periodic-edge":
            return self.n_agents
        if self.kind == "custom":
            return len(self.pattern)
        return 1

    @property
    def cycle_length(self) -> int:
        """Number of rounds after which the edge sets repeat."""
        if self.kind == "periodic-edge":
            return self.n_agents
        if self.kind == "custom":
            return len(self.pattern)
        return 1

    def edges_at(self, t: int) -> frozenset[Edge]:
        n = self.n_agents
        if n == 1:
            return frozenset()
        if self.kind == "cycle":
            return frozenset((i, (i + 1) % n) for i in range(n))
        if self.kind == "complete":
            return frozenset((i, j) for i in range(n) for j in range(n) if i != j)
        if self.kind == "periodic-edge":
            i = t % n
            return frozenset({(i, (i + 1) % n)})
        return self.pattern[t % len(self.pattern)]

    def in_neighbors(self, agent: int, t: int) -> list[int]:
        return sorted(j for j, i in self.edges_at(t) if i == agent and j != agent)


def check_schedule(schedule: NetworkSchedule) -> bool:
    """Whether the union of any L consecutive edge sets is strongly connected."""
    for start in range(schedule.cycle_length):
        graph = nx.DiGraph()
        graph.add_nodes_from(range(schedule.n_agents))
        for t in range(start, start + schedule.period):
            graph.add_edges_from(schedule.edges_at(t))
        if not nx.is_strongly_connected(graph):
            return False
    return True


@dataclass(frozen=True)
class TraceRecord:
    """One line of the per-round trace."""

    t: int
    agent: int
    label: int
    basis_hash: str
    unchanged_rounds: int
    event: str

    def line(self) -> str:
        return f"{self.t}, {self.agent}, {self.label}, {self.basis_hash}, {self.unchanged_rounds}, {self.event}"


@dataclass(eq=False)
class RunMetrics:
    """Table-style metrics of one run."""

    communication_rounds: int
    max_stored_nodes: int
    incumbent_cost: Optional[float]
    status: Status
    relative_error_pct: Optional[float] = None
    cloud_stored_nodes: int = 0
    nodes_solved: int = 0

    def with_reference(self, reference_cost: Optional[float]) -> RunMetrics:
        """Fill the relative error, in percent of the exact cost."""
        if reference_cost is None or self.incumbent_cost is None or reference_cost == 0:
            self.relative_error_pct = None
        else:
            self.relative_error_pct = 100.0 * (reference_cost - self.incumbent_cost) / abs(reference_cost)
        return self


@dataclass(eq=False)
class RunResult:
    """Metrics, final agent states and the recorded histories of a run."""

    metrics: RunMetrics
    agents: list[AgentState]
    label_history: list[list[int]] = field(default_factory=list)
    trace: list[TraceRecord] = field(default_factory=list)

    @property
    def incumbent_z(self) -> Optional[np.ndarray]:
        for agent in self.agents:
            if agent.incumbent_z is not None:
                return agent.incumbent_z
        return None


def schedule_for(config: Configuration, n_agents: int) -> NetworkSchedule:
    return NetworkSchedule(n_agents=n_agents, kind=config.graph)


def deliver(schedule: NetworkSchedule, t: int, latest: Sequence[Optional[Message]]) -> list[list[Message]]:
    """Inboxes of round t: latest message of every in-neighbor along the edges of round t."""
    inboxes: list[list[Message]] = [[] for _ in latest]
    for j, i in sorted(schedule.edges_at(t)):
        if i != j and latest[j] is not None:
            inboxes[i].append(latest[j])
    return inboxes


def record(trace: list[TraceRecord], t: int, state: AgentState) -> None:
    # node transition rows carry the basis the node solution was read from
    solved = state.last_event.split("+")[0] in NODE_EVENTS
    basis = state.solved_basis if solved and state.solved_basis is not None else state.basis
    trace.append(
        TraceRecord(
            t=t,
            agent=state.id,
            label=state.label,
            basis_hash=basis_key(basis),
            unchanged_rounds=state.unchanged_rounds,
            event=state.last_event,
        )
    )


def final_status(incumbent: Optional[float], first_incumbent: bool) -> Status:
    if incumbent is None:
        return Status.INFEASIBLE
    return Status.FEASIBLE if first_incumbent else Status.OPTIMAL


def run_distributed(
    instance: GapInstance,
    schedule: NetworkSchedule,
    config: Optional[Configuration] = None,
) -> RunResult:
    """Run the purely distributed algorithm until every agent halts."""
    config = (config or Configuration()).validate()
    first_incumbent = config.mode == "first-incumbent"
    setups = AgentSetup.for_agents(
        instance,
        schedule.period,
        first_incumbent=first_incumbent,
        eps_feas=config.eps_feas,
        eps_rc=config.eps_rc,
        eps_int=config.eps_int,
    )
    agents = [initial_state(setup) for setup in setups]
    latest: list[Optional[Message]] = [outbound(a) for a in agents]
    labels: list[list[int]] = [[a.label] for a in agents]
    trace: list[TraceRecord] = []

    rounds = 0
    while not all(a.halted for a in agents):
        if rounds >= config.round_cap:
            metrics = _metrics(agents, rounds, first_incumbent)
            raise RoundCapExceeded(f"no halt after {rounds} rounds", metrics)
        inboxes = deliver(schedule, rounds, latest)
        for i, agent in enumerate(agents):
            if agent.halted:
                continue
            agents[i], latest[i] = step(agent, inboxes[i], setups[i])
            labels[i].append(agents[i].label)
            if config.trace:
                record(trace, rounds, agents[i])
            if agents[i].halted:
                logger.debug(f"agent {i} halted at round {rounds + 1}")
        rounds += 1

    metrics = _metrics(agents, rounds, first_incumbent)
    logger.info(
        f"distributed run: {rounds} rounds, incumbent {metrics.incumbent_cost}, "
        f"stored nodes {metrics.max_stored_nodes}"
    )
    return RunResult(metrics=metrics, agents=agents, label_history=labels, trace=trace)


def _metrics(agents: Sequence[AgentState], rounds: int, first_incumbent: bool) -> RunMetrics:
    costs = [a.incumbent_cost for a in agents if a.incumbent_z is not None]
    incumbent = max(costs) if costs else None
    return RunMetrics(
        communication_rounds=rounds,
        max_stored_nodes=max(a.stored_nodes for a in agents),
        incumbent_cost=incumbent if incumbent is None or math.isfinite(incumbent) else None,
        status=final_status(incumbent, first_incumbent),
        nodes_solved=max(a.label for a in agents),
    )
