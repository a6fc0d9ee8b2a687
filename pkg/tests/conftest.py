import pytest

from gapnet.model import GapInstance


@pytest.fixture
def toy_instance() -> GapInstance:
    """Two agents, two tasks; the diagonal assignment is optimal with profit 20."""
    return GapInstance(profits=[[10, 1], [1, 10]], weights=[[1, 1], [1, 1]], capacities=[1, 1])


@pytest.fixture
def infeasible_instance() -> GapInstance:
    return GapInstance(profits=[[7]], weights=[[5]], capacities=[2])
