import pytest

from gapnet.agent import Message
from gapnet.lp import Basis
from gapnet.model import Status
from gapnet.network import NetworkSchedule, RunMetrics, check_schedule, deliver, final_status


class TestSchedules:
    def test_cycle_edges(self) -> None:
        schedule = NetworkSchedule(n_agents=3)
        assert schedule.edges_at(0) == {(0, 1), (1, 2), (2, 0)}
        assert schedule.edges_at(0) == schedule.edges_at(17)
        assert schedule.period == 1

    def test_periodic_edge_rotates(self) -> None:
        schedule = NetworkSchedule(n_agents=3, kind="periodic-edge")
        assert schedule.edges_at(0) == {(0, 1)}
        assert schedule.edges_at(4) == {(1, 2)}
        assert schedule.period == 3

    def test_in_neighbors(self) -> None:
        complete = NetworkSchedule(n_agents=4, kind="complete")
        assert complete.in_neighbors(2, 0) == [0, 1, 3]
        assert NetworkSchedule(n_agents=4).in_neighbors(0, 5) == [3]

    @pytest.mark.parametrize("n", range(2, 11))
    def test_cycle_and_periodic_edge_are_connected(self, n: int) -> None:
        assert check_schedule(NetworkSchedule(n_agents=n))
        assert check_schedule(NetworkSchedule(n_agents=n, kind="periodic-edge"))

    def test_cycle_of_five(self) -> None:
        assert check_schedule(NetworkSchedule(n_agents=5, kind="cycle"))

    def test_edgeless_schedule(self) -> None:
        assert not check_schedule(NetworkSchedule(n_agents=3, kind="custom", pattern=(frozenset(),)))

    def test_period_too_short(self) -> None:
        schedule = NetworkSchedule(n_agents=3, kind="periodic-edge", connectivity_period=2)
        assert not check_schedule(schedule)

    def test_unknown_kind(self) -> None:
        with pytest.raises(ValueError):
            NetworkSchedule(n_agents=2, kind="star")


def test_deliver_follows_active_edges() -> None:
    schedule = NetworkSchedule(n_agents=3, kind="periodic-edge")
    latest = [Message(sender=i, basis=Basis(()), label=i) for i in range(3)]
    inboxes = deliver(schedule, 1, latest)
    assert [m.sender for m in inboxes[2]] == [1]
    assert inboxes[0] == [] and inboxes[1] == []


def test_relative_error() -> None:
    metrics = RunMetrics(communication_rounds=10, max_stored_nodes=1, incumbent_cost=95.0, status=Status.FEASIBLE)
    assert metrics.with_reference(100.0).relative_error_pct == pytest.approx(5.0)
    assert metrics.with_reference(None).relative_error_pct is None


def test_final_status() -> None:
    assert final_status(None, False) is Status.INFEASIBLE
    assert final_status(3.0, False) is Status.OPTIMAL
    assert final_status(3.0, True) is Status.FEASIBLE
