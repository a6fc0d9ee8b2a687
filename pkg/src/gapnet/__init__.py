"""gapnet.

Distributed and cloud-assisted branch-and-price for the Generalized
Assignment Problem over simulated time-varying networks.
"""

from gapnet.graph import graph, run_cloud_assisted
from gapnet.network import NetworkSchedule, run_distributed

__all__ = ["graph", "run_cloud_assisted", "run_distributed", "NetworkSchedule"]
