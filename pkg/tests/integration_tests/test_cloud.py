"""Cloud-assisted runs through the compiled graph."""

from dataclasses import fields

import numpy as np
import pytest

from gapnet.configuration import Configuration
from gapnet.graph import CLOUD_ID, run_cloud_assisted
from gapnet.graph import graph as cloud_graph
from gapnet.model import GapInstance, Status, evaluate, generate, oracle_solve
from gapnet.network import NetworkSchedule, RoundCapExceeded, run_distributed
from gapnet.state import InputState


def test_toy_instance(toy_instance: GapInstance) -> None:
    result = run_cloud_assisted(toy_instance, NetworkSchedule(n_agents=2))
    assert result.metrics.status is Status.OPTIMAL
    assert result.metrics.incumbent_cost == 20
    assert np.array_equal(result.incumbent_z, np.eye(2))
    assert all(agent.halted for agent in result.agents)
    assert result.metrics.max_stored_nodes == 0
    assert result.metrics.cloud_stored_nodes >= 1


def test_infeasible_instance(infeasible_instance: GapInstance) -> None:
    result = run_cloud_assisted(infeasible_instance, NetworkSchedule(n_agents=1))
    assert result.metrics.status is Status.INFEASIBLE
    assert result.incumbent_z is None


def test_graph_accepts_plain_configurable(toy_instance: GapInstance) -> None:
    final = cloud_graph.invoke(
        {"instance": toy_instance, "schedule": NetworkSchedule(n_agents=2)},
        {"configurable": {"mode": "exact", "trace": True}, "recursion_limit": 200},
    )
    assert final["done"] is True
    assert final["cloud"].incumbent_cost == 20
    assert any(row.agent == CLOUD_ID for row in final["trace"])


def test_graph_input_is_instance_and_schedule() -> None:
    assert InputState in cloud_graph.builder.schemas
    assert {f.name for f in fields(InputState)} == {"instance", "schedule"}


def test_round_cap(toy_instance: GapInstance) -> None:
    with pytest.raises(RoundCapExceeded) as exc:
        run_cloud_assisted(toy_instance, NetworkSchedule(n_agents=2), Configuration(round_cap=2))
    assert exc.value.metrics.communication_rounds == 2


@pytest.mark.parametrize("model", ["A", "B", "C", "D"])
def test_same_optimum_as_distributed(model: str) -> None:
    for seed in range(50):
        instance = generate(model, 2 + seed % 2, 4 + 2 * ((seed // 2) % 2), seed)
        schedule = NetworkSchedule(n_agents=instance.n_agents)
        cloud = run_cloud_assisted(instance, schedule)
        distributed = run_distributed(instance, schedule)
        assert cloud.metrics.status is distributed.metrics.status
        assert cloud.metrics.incumbent_cost == distributed.metrics.incumbent_cost
        assert cloud.metrics.incumbent_cost == oracle_solve(instance).cost
        assert cloud.metrics.max_stored_nodes == 0
        if cloud.incumbent_z is not None:
            assert evaluate(instance, cloud.incumbent_z) == cloud.metrics.incumbent_cost
            first = cloud.agents[0].incumbent_z
            assert all(np.array_equal(agent.incumbent_z, first) for agent in cloud.agents)


def test_first_incumbent_halts_everyone() -> None:
    config = Configuration(mode="first-incumbent")
    for seed in range(10):
        instance = generate("B", 3, 6, seed)
        result = run_cloud_assisted(instance, NetworkSchedule(n_agents=3), config)
        assert all(agent.halted for agent in result.agents)
        if result.incumbent_z is None:
            assert oracle_solve(instance).cost is None
            continue
        assert result.metrics.status is Status.FEASIBLE
        assert evaluate(instance, result.incumbent_z) == result.metrics.incumbent_cost
        assert result.metrics.incumbent_cost <= oracle_solve(instance).cost


def test_cloud_labels_never_decrease() -> None:
    instance = generate("C", 3, 6, seed=4)
    result = run_cloud_assisted(instance, NetworkSchedule(n_agents=3, kind="periodic-edge"))
    for history in result.label_history:
        assert all(a <= b for a, b in zip(history, history[1:]))
    assert result.metrics.nodes_solved >= 1
