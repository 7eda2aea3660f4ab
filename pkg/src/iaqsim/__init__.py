"""Discrete-event simulator of a ZigBee indoor air-quality sensor network."""

from .engine import EventRecord, RunResult, run
from .rng import seed_stream
from .scenario import Scenario, ScenarioError, load_scenario

__all__ = ["EventRecord", "RunResult", "Scenario", "ScenarioError", "load_scenario", "run", "seed_stream"]
__version__ = "0.1.0"
