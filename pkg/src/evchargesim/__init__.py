"""Switching-level simulation of Level 1/2/3 EV charging systems."""

from .battery import Battery, BatteryParams
from .engine import (Command, Engine, EngineError, RunReport, ScheduledCommand,
                     SimConfig, StepReport)
from .testbeds import (Scenario, TestbedConfig, build, default_scenario,
                       level1, level2, level3, load_config, step_test_scenario)

__version__ = "0.1.0"

__all__ = [
    "Battery", "BatteryParams", "Command", "Engine", "EngineError",
    "RunReport", "Scenario", "ScheduledCommand", "SimConfig", "StepReport",
    "TestbedConfig", "build", "default_scenario", "level1", "level2",
    "level3", "load_config", "step_test_scenario", "__version__",
]
