"""End-to-end runs of the purely distributed algorithm against the exhaustive oracle."""

import numpy as np
import pytest

from gapnet.configuration import Configuration
from gapnet.model import GapInstance, Status, evaluate, generate, oracle_solve
from gapnet.network import NODE_EVENTS, NetworkSchedule, RoundCapExceeded, run_distributed


def small_instances(model: str, count: int):
    for seed in range(count):
        n = 2 + seed % 2
        m = 4 + 2 * ((seed // 2) % 2)
        yield seed, generate(model, n, m, seed)


def assert_consensus_on_optimum(instance: GapInstance, result) -> None:
    reference = oracle_solve(instance)
    assert all(agent.halted for agent in result.agents)
    for history in result.label_history:
        assert all(a <= b for a, b in zip(history, history[1:]))
    if reference.cost is None:
        assert result.metrics.status is Status.INFEASIBLE
        assert all(agent.incumbent_z is None for agent in result.agents)
        return
    assert result.metrics.incumbent_cost == reference.cost
    first = result.agents[0]
    for agent in result.agents:
        assert agent.incumbent_cost == reference.cost
        assert np.array_equal(agent.incumbent_z, first.incumbent_z)
    assert evaluate(instance, first.incumbent_z) == reference.cost


def test_toy_instance(toy_instance: GapInstance) -> None:
    result = run_distributed(toy_instance, NetworkSchedule(n_agents=2))
    assert result.metrics.incumbent_cost == 20
    assert result.metrics.status is Status.OPTIMAL
    assert all(agent.incumbent_cost == 20 for agent in result.agents)
    assert np.array_equal(result.incumbent_z, np.eye(2))


def test_infeasible_instance(infeasible_instance: GapInstance) -> None:
    result = run_distributed(infeasible_instance, NetworkSchedule(n_agents=1))
    assert result.metrics.status is Status.INFEASIBLE
    assert result.metrics.incumbent_cost is None
    assert result.incumbent_z is None


def test_runs_are_deterministic(toy_instance: GapInstance) -> None:
    config = Configuration(trace=True)
    first = run_distributed(toy_instance, NetworkSchedule(n_agents=2), config)
    second = run_distributed(toy_instance, NetworkSchedule(n_agents=2), config)
    assert first.trace == second.trace
    assert first.metrics.communication_rounds == second.metrics.communication_rounds
    assert first.metrics.max_stored_nodes == second.metrics.max_stored_nodes


def test_round_cap(toy_instance: GapInstance) -> None:
    with pytest.raises(RoundCapExceeded) as exc:
        run_distributed(toy_instance, NetworkSchedule(n_agents=2), Configuration(round_cap=3))
    assert exc.value.metrics.communication_rounds == 3


@pytest.mark.parametrize("model", ["A", "B", "C", "D"])
def test_matches_oracle_on_cycle(model: str) -> None:
    for _, instance in small_instances(model, 50):
        result = run_distributed(instance, NetworkSchedule(n_agents=instance.n_agents))
        assert_consensus_on_optimum(instance, result)


@pytest.mark.parametrize("model", ["A", "B", "C", "D"])
def test_matches_oracle_on_periodic_edge(model: str) -> None:
    for _, instance in small_instances(model, 50):
        schedule = NetworkSchedule(n_agents=instance.n_agents, kind="periodic-edge")
        assert_consensus_on_optimum(instance, run_distributed(instance, schedule))


def test_complete_graph_reaches_same_optimum() -> None:
    instance = generate("A", 3, 6, seed=2)
    cycle = run_distributed(instance, NetworkSchedule(n_agents=3))
    complete = run_distributed(instance, NetworkSchedule(n_agents=3, kind="complete"))
    assert complete.metrics.incumbent_cost == cycle.metrics.incumbent_cost


def test_first_incumbent_is_feasible() -> None:
    for _, instance in small_instances("A", 10):
        result = run_distributed(
            instance, NetworkSchedule(n_agents=instance.n_agents), Configuration(mode="first-incumbent")
        )
        reference = oracle_solve(instance).cost
        if result.incumbent_z is None:
            assert reference is None
            continue
        assert result.metrics.status is Status.FEASIBLE
        for agent in result.agents:
            if agent.incumbent_z is not None:
                assert evaluate(instance, agent.incumbent_z) == agent.incumbent_cost
                assert agent.incumbent_cost <= reference


@pytest.mark.parametrize("kind", ["cycle", "periodic-edge"])
def test_agents_solve_each_node_from_the_same_basis(kind: str) -> None:
    config = Configuration(trace=True)
    for model in "ABCD":
        for _, instance in small_instances(model, 10):
            result = run_distributed(instance, NetworkSchedule(n_agents=instance.n_agents, kind=kind), config)
            solved: dict[int, set[str]] = {}
            for row in result.trace:
                if row.event.split("+")[0] in NODE_EVENTS:
                    # the row's label is the one the agent moved to
                    solved.setdefault(row.label, set()).add(row.basis_hash)
            assert solved
            assert all(len(hashes) == 1 for hashes in solved.values())
