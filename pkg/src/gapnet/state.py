"""Define the state structures for the cloud-assisted coordinator graph."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from gapnet.agent import AgentSetup, AgentState, Message
from gapnet.lp import Basis
from gapnet.model import GapInstance
from gapnet.network import NetworkSchedule, TraceRecord
from gapnet.pricing import FixingSet
from gapnet.tree import NO_INCUMBENT, BranchNode, Tree


@dataclass(frozen=True)
class Broadcast:
    """What the cloud sends after processing a node: agent i receives `fixings[i]`."""

    label: int
    fixings: tuple[FixingSet, ...]


@dataclass(frozen=True, eq=False)
class CloudState:
    """The branching tree and the incumbent, held by the cloud node."""

    tree: Tree
    node: BranchNode
    """Node the agents are currently solving."""

    label: int = 0
    incumbent_cost: float = NO_INCUMBENT
    incumbent_z: Optional[np.ndarray] = None
    pending: Optional[Broadcast] = None
    """Broadcast delivered to the agents at the start of the next round."""


@dataclass
class InputState:
    """Defines the input of a cloud-assisted run: the instance and its network.

    Everything else is derived on the first pass through `column_generation`.
    """

    instance: GapInstance
    schedule: NetworkSchedule


@dataclass
class CloudRunState(InputState):
    """Represents the complete state of a cloud-assisted run.

    The graph alternates between rounds of column generation on the agents
    and node updates on the cloud until the cloud's tree is exhausted.
    """

    setups: list[AgentSetup] = field(default_factory=list)
    agents: list[AgentState] = field(default_factory=list)
    latest: list[Optional[Message]] = field(default_factory=list)
    """Last outbound message of each agent, read by its out-neighbors next round."""

    cloud: Optional[CloudState] = None
    rounds: int = 0

    upload: Optional[Basis] = None
    """Converged basis uploaded in the last round, if any."""

    label_history: list[list[int]] = field(default_factory=list)
    trace: list[TraceRecord] = field(default_factory=list)
    done: bool = False
