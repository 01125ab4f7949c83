"""Discrete-event simulation of PTP time synchronization over wired TSN and 5G links."""

from .clock import CounterMode, OscillatorClock, RateRatioEstimator
from .config import ConfigError, ScenarioConfig
from .engine import Engine, SimulationError
from .scenario import RunResult, World, run_scenario

__all__ = [
    "ConfigError",
    "CounterMode",
    "Engine",
    "OscillatorClock",
    "RateRatioEstimator",
    "RunResult",
    "ScenarioConfig",
    "SimulationError",
    "World",
    "run_scenario",
]

__version__ = "0.1.0"
