"""Cloud-assisted coordinator.

Agents only generate columns. When one of them detects convergence it
uploads its basis; the cloud reads the node solution, updates the
incumbent or branches, extracts the next node from its own tree and
broadcasts the per-agent fixings, which take effect the following round.
"""

from __future__ import annotations

import logging
import math
from dataclasses import replace
from typing import Any, Literal, Optional, Sequence

from langchain_core.runnables import RunnableConfig
from langgraph.graph import StateGraph

from gapnet.agent import AgentSetup, AgentState, cloud_step, enter_node, initial_state, outbound
from gapnet.configuration import Configuration
from gapnet.lp import basis_key
from gapnet.model import GapInstance
from gapnet.network import (
    NetworkSchedule,
    RoundCapExceeded,
    RunMetrics,
    RunResult,
    TraceRecord,
    deliver,
    final_status,
    record,
)
from gapnet.state import Broadcast, CloudRunState, CloudState, InputState
from gapnet.tree import NodeAction, Tree, assess, branch, consider, extract

logger = logging.getLogger(__name__)

CLOUD_ID = -1
"""Agent id used for the cloud's rows in the trace."""


def _start(state: CloudRunState, configuration: Configuration) -> tuple[list[AgentSetup], list[AgentState], CloudState]:
    setups = AgentSetup.for_agents(
        state.instance,
        state.schedule.period,
        first_incumbent=configuration.mode == "first-incumbent",
        eps_feas=configuration.eps_feas,
        eps_rc=configuration.eps_rc,
        eps_int=configuration.eps_int,
    )
    agents = [initial_state(setup, with_tree=False) for setup in setups]
    tree = Tree.with_root(state.instance.n_agents)
    label, root = extract(tree)
    return setups, agents, CloudState(tree=tree, node=root, label=label)


def column_generation(state: CloudRunState, config: RunnableConfig) -> dict[str, Any]:
    """Advance rounds of column generation until some agent uploads a converged basis.

    On the first pass this sets up the agents and the cloud's root node. Each
    round applies any pending broadcast, delivers the latest messages along the
    round's edges and steps every agent.

    Args:
        state (CloudRunState): The current state of the run.
        config (RunnableConfig): Configuration for the run.

    Returns:
        dict: The updated agents, messages, round count and the uploaded basis.

    Raises:
        RoundCapExceeded: No agent uploaded before the round cap.
    """
    configuration = Configuration.from_runnable_config(config)
    if state.cloud is None:
        setups, agents, cloud = _start(state, configuration)
        latest = [outbound(a) for a in agents]
        labels = [[a.label] for a in agents]
    else:
        setups, agents, cloud = state.setups, list(state.agents), state.cloud
        latest = list(state.latest)
        labels = [list(history) for history in state.label_history]
    trace = list(state.trace)
    rounds = state.rounds

    while True:
        if rounds >= configuration.round_cap:
            metrics = _metrics(agents, cloud, rounds, configuration.mode == "first-incumbent")
            raise RoundCapExceeded(f"no halt after {rounds} rounds", metrics)
        if cloud.pending is not None:
            broadcast = cloud.pending
            agents = [enter_node(a, broadcast.label, broadcast.fixings[a.id], setups[a.id]) for a in agents]
            cloud = replace(cloud, pending=None)

        inboxes = deliver(state.schedule, rounds, latest)
        upload = None
        for i, agent in enumerate(agents):
            agents[i], latest[i] = cloud_step(agent, inboxes[i], setups[i])
            labels[i].append(agents[i].label)
            if configuration.trace:
                record(trace, rounds, agents[i])
            if upload is None and agents[i].last_event == "upload":
                upload = agents[i].basis
        rounds += 1
        if upload is not None:
            break

    return {
        "setups": setups,
        "agents": agents,
        "latest": latest,
        "cloud": cloud,
        "rounds": rounds,
        "upload": upload,
        "label_history": labels,
        "trace": trace,
    }


def cloud_update(state: CloudRunState, config: RunnableConfig) -> dict[str, Any]:
    """Read the uploaded node solution, then broadcast the next node or halt everyone.

    Args:
        state (CloudRunState): The current state of the run, holding the upload.
        config (RunnableConfig): Configuration for the run.

    Returns:
        dict: The cloud's new tree and incumbent, plus either the pending
        broadcast or halted agents with `done` set.
    """
    configuration = Configuration.from_runnable_config(config)
    cloud = state.cloud
    layout = state.setups[0].layout
    outcome = assess(state.upload, layout, configuration.eps_int)
    action = consider(
        outcome.cost,
        outcome.z,
        cloud.incumbent_cost,
        infeasible=outcome.infeasible,
        eps_int=configuration.eps_int,
    )
    tree = cloud.tree.copy()
    incumbent_cost, incumbent_z = cloud.incumbent_cost, cloud.incumbent_z
    stop = False
    if action is NodeAction.UPDATE_INCUMBENT:
        incumbent_cost, incumbent_z = outcome.cost, outcome.z.astype("int8")
        logger.info(f"cloud: incumbent {incumbent_cost:g} at label {cloud.label}")
        stop = configuration.mode == "first-incumbent"
    elif action is NodeAction.BRANCH:
        branch(tree, outcome.z, cloud.node, configuration.eps_int)

    extracted = None if stop else extract(tree)
    event = action.value if extracted is not None else f"{action.value}+halt"
    trace = list(state.trace)
    if configuration.trace:
        trace.append(
            TraceRecord(
                t=state.rounds - 1,
                agent=CLOUD_ID,
                label=cloud.label,
                basis_hash=basis_key(state.upload),
                unchanged_rounds=0,
                event=event,
            )
        )

    if extracted is None:
        agents = [
            replace(a, halted=True, incumbent_cost=incumbent_cost, incumbent_z=incumbent_z, last_event="halt")
            for a in state.agents
        ]
        cloud = replace(cloud, tree=tree, incumbent_cost=incumbent_cost, incumbent_z=incumbent_z)
        logger.debug(f"cloud: tree exhausted after label {cloud.label}")
        return {"cloud": cloud, "agents": agents, "upload": None, "trace": trace, "done": True}

    label, node = extracted
    broadcast = Broadcast(
        label=label,
        fixings=tuple(node.fixings_for(i) for i in range(state.instance.n_agents)),
    )
    cloud = CloudState(
        tree=tree,
        node=node,
        label=label,
        incumbent_cost=incumbent_cost,
        incumbent_z=incumbent_z,
        pending=broadcast,
    )
    return {"cloud": cloud, "upload": None, "trace": trace}


def route_cloud_output(state: CloudRunState) -> Literal["__end__", "column_generation"]:
    """Determine the next node after a cloud update.

    Args:
        state (CloudRunState): The current state of the run.

    Returns:
        str: The name of the next node to call ("__end__" or "column_generation").
    """
    if state.done:
        return "__end__"
    return "column_generation"


builder = StateGraph(CloudRunState, input=InputState, config_schema=Configuration)

builder.add_node(column_generation)
builder.add_node(cloud_update)

builder.add_edge("__start__", "column_generation")
builder.add_edge("column_generation", "cloud_update")
builder.add_conditional_edges("cloud_update", route_cloud_output)

graph = builder.compile()
graph.name = "Cloud-assisted branch-and-price"


def run_cloud_assisted(
    instance: GapInstance,
    schedule: NetworkSchedule,
    config: Optional[Configuration] = None,
) -> RunResult:
    """Run the cloud-assisted algorithm; agents store no tree nodes."""
    config = (config or Configuration()).validate()
    final = graph.invoke(
        {"instance": instance, "schedule": schedule},
        {
            "configurable": {"configuration": config},
            # every pass through the graph consumes at least one round
            "recursion_limit": 2 * config.round_cap + 8,
        },
    )
    agents: list[AgentState] = final["agents"]
    metrics = _metrics(agents, final["cloud"], final["rounds"], config.mode == "first-incumbent")
    logger.info(
        f"cloud-assisted run: {metrics.communication_rounds} rounds, incumbent {metrics.incumbent_cost}, "
        f"cloud stored nodes {metrics.cloud_stored_nodes}"
    )
    return RunResult(
        metrics=metrics,
        agents=agents,
        label_history=final["label_history"],
        trace=final["trace"],
    )


def _metrics(agents: Sequence[AgentState], cloud: CloudState, rounds: int, first_incumbent: bool) -> RunMetrics:
    incumbent: Optional[float] = cloud.incumbent_cost if cloud.incumbent_z is not None else None
    return RunMetrics(
        communication_rounds=rounds,
        max_stored_nodes=max(a.stored_nodes for a in agents),
        incumbent_cost=incumbent if incumbent is None or math.isfinite(incumbent) else None,
        status=final_status(incumbent, first_incumbent),
        cloud_stored_nodes=cloud.tree.max_stored,
        nodes_solved=cloud.tree.next_label,
    )
