"""Discrete-event simulator of a two-vehicle mmWave NR sidelink platoon."""
from .config import ConfigError, PowerAllocation, Scenario, SimConfig, SweepSpec, expand_sweep, parse_config
from .harness import RunResult, aggregate, run_many, run_replication

__all__ = [
    "ConfigError", "PowerAllocation", "Scenario", "SimConfig", "SweepSpec", "expand_sweep",
    "parse_config", "RunResult", "aggregate", "run_many", "run_replication",
]
__version__ = "0.1.0"
