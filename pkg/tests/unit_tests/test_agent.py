import numpy as np
import pytest

from gapnet.agent import (
    AgentSetup,
    AgentState,
    Message,
    cloud_step,
    detect_convergence,
    enter_node,
    generate_columns,
    initial_state,
    outbound,
    restart_basis,
    step,
)
from gapnet.lp import Basis, big_m_basis, real_column
from gapnet.model import GapInstance
from gapnet.network import NetworkSchedule, deliver
from gapnet.pricing import FixingSet


@pytest.fixture
def setups(toy_instance: GapInstance) -> list[AgentSetup]:
    return AgentSetup.for_agents(toy_instance, period=1)


class TestConvergence:
    @pytest.mark.parametrize(
        "n_agents, unchanged, expected",
        [(2, 5, True), (2, 4, False), (5, 11, True), (5, 10, False)],
    )
    def test_threshold(self, n_agents: int, unchanged: int, expected: bool) -> None:
        state = AgentState(id=0, basis=big_m_basis(n_agents, 2, 10.0), unchanged_rounds=unchanged)
        assert detect_convergence(state, n_agents, 1) is expected

    def test_setup_threshold(self, setups: list[AgentSetup]) -> None:
        assert setups[0].threshold == 5


class TestInitialState:
    def test_big_m_start(self, setups: list[AgentSetup]) -> None:
        state = initial_state(setups[0])
        assert state.label == 0
        assert all(c.is_artificial for c in state.basis.columns)
        assert state.incumbent_z is None
        assert state.stored_nodes == 1

    def test_cloud_agents_hold_no_tree(self, setups: list[AgentSetup]) -> None:
        state = initial_state(setups[0], with_tree=False)
        assert state.tree is None
        assert state.stored_nodes == 0

    def test_messages_carry_real_columns_only(self, setups: list[AgentSetup]) -> None:
        state = generate_columns(initial_state(setups[0]), [], setups[0])
        message = outbound(state)
        assert message.label == state.label
        assert all(not c.is_artificial for c in message.basis.columns)
        assert len(message.basis) >= 1


class TestColumnGeneration:
    def test_pricing_adds_own_column(self, setups: list[AgentSetup]) -> None:
        state = generate_columns(initial_state(setups[0]), [], setups[0])
        owners = {c.owner for c in state.basis.real_columns()}
        assert owners == {0}
        assert state.unchanged_rounds == 0

    def test_other_labels_are_ignored(self, setups: list[AgentSetup], toy_instance: GapInstance) -> None:
        foreign = real_column((0, 1), 1, toy_instance.profits[1])
        stale = Message(sender=1, basis=Basis((foreign,)), label=7)
        state = initial_state(setups[0])
        state.label = 8
        after = generate_columns(state, [stale], setups[0])
        assert foreign not in after.basis

    def test_same_label_columns_are_merged(self, setups: list[AgentSetup], toy_instance: GapInstance) -> None:
        foreign = real_column((0, 1), 1, toy_instance.profits[1])
        after = generate_columns(initial_state(setups[0]), [Message(1, Basis((foreign,)), 0)], setups[0])
        assert foreign in after.basis

    def test_unchanged_rounds_count_up(self, setups: list[AgentSetup], toy_instance: GapInstance) -> None:
        state = initial_state(setups[0])
        neighbor = Message(1, Basis((real_column((0, 1), 1, toy_instance.profits[1]),)), 0)
        for _ in range(10):
            state = generate_columns(state, [neighbor], setups[0])
        assert state.unchanged_rounds >= 1


class TestNodeTransition:
    def test_larger_neighbor_label_advances_by_one(self, setups: list[AgentSetup]) -> None:
        state = initial_state(setups[0])
        ahead = Message(sender=1, basis=Basis(()), label=3)
        state, message = step(state, [ahead], setups[0])
        assert state.label == 1
        assert message.label == 1

    def test_single_agent_root_is_integral(self) -> None:
        instance = GapInstance(profits=[[7]], weights=[[1]], capacities=[1])
        (setup,) = AgentSetup.for_agents(instance, period=1)
        state = initial_state(setup)
        for _ in range(20):
            if state.halted:
                break
            state, _ = step(state, [], setup)
        assert state.halted
        assert state.incumbent_cost == 7
        assert np.array_equal(state.incumbent_z, [[1]])
        assert state.last_event == "update-incumbent+halt"

    def test_halted_agent_refuses_to_step(self, setups: list[AgentSetup]) -> None:
        state = initial_state(setups[0])
        state.halted = True
        with pytest.raises(ValueError):
            step(state, [], setups[0])


class TestRestart:
    def test_keeps_own_admissible_columns(self, setups: list[AgentSetup], toy_instance: GapInstance) -> None:
        mine = real_column((1, 0), 0, toy_instance.profits[0])
        excluded = real_column((0, 1), 0, toy_instance.profits[0])
        foreign = real_column((0, 1), 1, toy_instance.profits[1])
        basis = restart_basis([mine, excluded, foreign], FixingSet({1: 0}), setups[0])
        assert mine in basis
        assert excluded not in basis
        assert foreign not in basis

    def test_enter_node_applies_broadcast(self, setups: list[AgentSetup]) -> None:
        state = initial_state(setups[1], with_tree=False)
        state.awaiting_cloud = True
        state = enter_node(state, 4, FixingSet({0: 0}), setups[1])
        assert state.label == 4
        assert state.fixings == FixingSet({0: 0})
        assert not state.awaiting_cloud
        assert state.unchanged_rounds == 0


def test_cloud_step_flags_upload_once(setups: list[AgentSetup]) -> None:
    state = initial_state(setups[0], with_tree=False)
    uploads = 0
    for _ in range(30):
        state, _ = cloud_step(state, [], setups[0])
        uploads += state.last_event == "upload"
    assert state.awaiting_cloud
    assert uploads == 1
    assert state.label == 0


def test_one_message_per_agent_per_round(setups: list[AgentSetup]) -> None:
    schedule = NetworkSchedule(n_agents=2)
    agents = [initial_state(setup) for setup in setups]
    latest = [outbound(a) for a in agents]
    for t in range(300):
        if all(a.halted for a in agents):
            break
        inboxes = deliver(schedule, t, latest)
        for i, agent in enumerate(agents):
            if agent.halted:
                continue
            senders = [m.sender for m in inboxes[i]]
            assert len(senders) == len(set(senders))
            assert i not in senders
            agents[i], message = step(agent, inboxes[i], setups[i])
            assert isinstance(message, Message)
            assert message.sender == i
            assert message.label == agents[i].label
            latest[i] = message
    assert all(a.halted for a in agents)
