"""Define the configurable parameters for the solvers."""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields
from typing import Optional

from langchain_core.runnables import RunnableConfig, ensure_config

GRAPH_KINDS = ("cycle", "complete", "periodic-edge")
MODES = ("exact", "first-incumbent")
VARIANTS = ("distributed", "cloud")


class ConfigurationError(ValueError):
    """Raised when a configuration value is out of range or unknown."""


def _env_flag(name: str, default: str = "false") -> bool:
    return os.getenv(name, default).lower() in ["true", "1", "yes"]


@dataclass(kw_only=True)
class Configuration:
    """The configuration for a solver run."""

    eps_feas: float = field(
        default=1e-9,
        metadata={
            "description": "Primal feasibility tolerance on basic values and residuals."
        },
    )

    eps_rc: float = field(
        default=1e-9,
        metadata={
            "description": "A column improves the master problem only if its reduced cost exceeds this."
        },
    )

    eps_int: float = field(
        default=1e-6,
        metadata={
            "description": "Distance from the nearest integer below which an entry of z counts as integral."
        },
    )

    round_cap: int = field(
        default_factory=lambda: int(os.getenv("GAPNET_ROUND_CAP", 10**6)),
        metadata={
            "description": "Maximum number of communication rounds before a run is aborted."
        },
    )

    graph: str = field(
        default_factory=lambda: os.getenv("GAPNET_GRAPH", "cycle"),
        metadata={
            "description": "Communication schedule: cycle, complete or periodic-edge."
        },
    )

    mode: str = field(
        default_factory=lambda: os.getenv("GAPNET_MODE", "exact"),
        metadata={
            "description": "exact explores the whole tree; first-incumbent stops at the first feasible solution."
        },
    )

    variant: str = field(
        default_factory=lambda: os.getenv("GAPNET_VARIANT", "distributed"),
        metadata={
            "description": "distributed keeps a tree on every agent; cloud keeps it on the cloud node."
        },
    )

    round_period_s: float = field(
        default=0.005,
        metadata={
            "description": "Simulated wall time of one communication round in the dynamic scenario."
        },
    )

    trace: bool = field(
        default_factory=lambda: _env_flag("GAPNET_TRACE"),
        metadata={"description": "Collect per-round trace records."},
    )

    oracle_guard: int = field(
        default=24,
        metadata={
            "description": "Largest N*M for which the exhaustive oracle is run."
        },
    )

    def validate(self) -> Configuration:
        """Check enumerated fields and return self."""
        if self.graph not in GRAPH_KINDS:
            raise ConfigurationError(f"unknown graph {self.graph!r}; expected one of {GRAPH_KINDS}")
        if self.mode not in MODES:
            raise ConfigurationError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.variant not in VARIANTS:
            raise ConfigurationError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if self.round_cap < 1:
            raise ConfigurationError("round_cap must be positive")
        return self

    @classmethod
    def from_runnable_config(
        cls, config: Optional[RunnableConfig] = None
    ) -> Configuration:
        """Create a Configuration from the `configurable` part of a RunnableConfig."""
        if isinstance(config, cls):
            return config
        config = ensure_config(config)
        configurable = config.get("configurable") or {}
        if isinstance(configurable.get("configuration"), cls):
            return configurable["configuration"]
        _fields = {f.name for f in fields(cls) if f.init}
        return cls(**{k: v for k, v in configurable.items() if k in _fields})
